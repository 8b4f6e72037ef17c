"""
測試共用設定：把專案根目錄加入 sys.path，並提供固定種子的亂數產生器
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
