"""类别二元链语言

句子由上下文类别上的一阶马尔可夫链生成：先按类别转移概率走一步，再在类别内抽取 token。
可互换类内部均匀，使其成员在上下文上几乎无法区分；其余类内部权重各不相同。
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..exceptions import DataGenerationError
from .vocabulary import Vocabulary


@dataclass
class BigramLanguage:
    vocab: Vocabulary
    start: np.ndarray          # [C] 首个类别的分布
    transitions: np.ndarray    # [C, C] 类别转移矩阵
    emissions: List[np.ndarray]  # 每个类别内部的 token 分布

    @classmethod
    def from_seed(
        cls, vocab: Vocabulary, seed: int, concentration: float = 0.3
    ) -> "BigramLanguage":
        if concentration <= 0:
            raise DataGenerationError(
                f"concentration must be positive, got {concentration}",
                generator="language",
            )
        rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
        n_classes = vocab.n_classes
        start = rng.dirichlet(np.ones(n_classes))
        transitions = rng.dirichlet(np.full(n_classes, concentration), size=n_classes)
        emissions = []
        for index, members in enumerate(vocab.classes):
            if index == 0:
                emissions.append(np.full(len(members), 1.0 / len(members)))
            else:
                emissions.append(rng.dirichlet(np.ones(len(members))))
        return cls(
            vocab=vocab, start=start, transitions=transitions, emissions=emissions
        )

    def sample_classes(self, rng: np.random.Generator, length: int) -> List[int]:
        classes = [int(rng.choice(len(self.start), p=self.start))]
        for _ in range(length - 1):
            classes.append(
                int(rng.choice(len(self.start), p=self.transitions[classes[-1]]))
            )
        return classes

    def sample_sentence(self, rng: np.random.Generator, length: int) -> Tuple[int, ...]:
        """按链采样长度为 length 的句子"""
        if length < 1:
            raise DataGenerationError(
                f"sentence length must be >= 1, got {length}", generator="language"
            )
        tokens = []
        for c in self.sample_classes(rng, length):
            members = self.vocab.classes[c]
            tokens.append(members[int(rng.choice(len(members), p=self.emissions[c]))])
        return tuple(tokens)

    def sample_length(
        self, rng: np.random.Generator, min_len: int, max_len: int
    ) -> int:
        if min_len > max_len or min_len < 1:
            raise DataGenerationError(
                f"empty sentence length range [{min_len}, {max_len}]",
                generator="language",
            )
        return int(rng.integers(min_len, max_len + 1))

    def log_prob(self, tokens: Tuple[int, ...]) -> float:
        """句子在链下的对数概率"""
        total = 0.0
        previous = None
        for token in tokens:
            c = self.vocab.class_of(token)
            position = self.vocab.classes[c].index(token)
            class_prob = (
                self.start[c] if previous is None else self.transitions[previous, c]
            )
            total += float(np.log(class_prob) + np.log(self.emissions[c][position]))
            previous = c
        return total
