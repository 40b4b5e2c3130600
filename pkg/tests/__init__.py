"""测试模块

包含所有测试用例和测试工具。
"""

# 测试标记
TEST_MARKS = {
    "unit": "单元测试",
    "integration": "集成测试",
    "slow": "慢速测试（桌面规模训练）",
}
