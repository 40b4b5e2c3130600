"""共享词表

前四个 id 是特殊符号；其余为内容 token，按上下文类别分组：
第一个类别是“可互换”类（同一上下文，类似数字），其余类别大小相同。
"""

from dataclasses import dataclass
from typing import List, Tuple

from ..exceptions import DataGenerationError

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
MASK_ID = 3
N_SPECIALS = 4


@dataclass(frozen=True)
class Vocabulary:
    size: int
    digit_class_size: int = 10
    class_size: int = 5
    pad: int = PAD_ID
    bos: int = BOS_ID
    eos: int = EOS_ID
    mask: int = MASK_ID

    def __post_init__(self):
        specials = (self.pad, self.bos, self.eos, self.mask)
        if len(set(specials)) != len(specials) or max(specials) >= self.size:
            raise DataGenerationError(
                f"special ids {specials} must be distinct and < {self.size}",
                generator="vocabulary",
            )
        if self.size - N_SPECIALS < self.digit_class_size + 2 * self.class_size:
            raise DataGenerationError(
                f"vocabulary of {self.size} too small for a {self.digit_class_size}-token class plus two "
                f"{self.class_size}-token classes",
                generator="vocabulary",
            )

    @property
    def content_ids(self) -> Tuple[int, ...]:
        return tuple(range(N_SPECIALS, self.size))

    @property
    def classes(self) -> List[Tuple[int, ...]]:
        """上下文类别；余下不足一个类别的 token 并入最后一类"""
        ids = self.content_ids
        groups = [ids[: self.digit_class_size]]
        rest = ids[self.digit_class_size:]
        n_rest = len(rest) // self.class_size
        for index in range(n_rest):
            start = index * self.class_size
            stop = len(rest) if index == n_rest - 1 else start + self.class_size
            groups.append(rest[start:stop])
        return groups

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_of(self, token: int) -> int:
        for index, members in enumerate(self.classes):
            if token in members:
                return index
        raise DataGenerationError(
            f"token {token} is not a content token", generator="vocabulary"
        )
