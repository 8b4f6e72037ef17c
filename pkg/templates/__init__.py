"""
輸出模板模組初始化
"""
from .curve_headers import CURVE_HEADERS, singular_value_columns
