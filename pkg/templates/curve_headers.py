"""
曲線 CSV 的欄位與註解標頭
"""

# 每個曲線: (註解標頭, 欄位)
CURVE_HEADERS = {
    'error_vs_rank': (
        "各秩的 sup-node Frobenius 誤差 max_k ‖U_approx(t_k) − U(t_k)‖_F；svd_error 為截斷 SVD 的最佳秩 r 誤差",
        ['rank', 'als_error', 'df_error', 'svd_error'],
    ),
    'error_vs_time': (
        "逐節點 Frobenius 誤差 ‖U_approx(t_k) − U(t_k)‖_F，t 為無因次時間",
        ['rank', 't', 'als_error', 'df_error', 'svd_error'],
    ),
    'singular_values': (
        "參考解 U(t_k) 的前幾個奇異值 (非遞增)",
        None,
    ),
    'als_history': (
        "ALS 每個半步後的 F_N 與 CG 迭代次數",
        ['rank', 'sweep', 'half', 'F_N', 'cg_iterations'],
    ),
    'pathological_errors': (
        "終止時間的 Frobenius 誤差 ‖U_approx(T) − U(T)‖_F 與計算時間 (秒)；method 為 als、df 或 svd，noise 為初始因子的雜訊幅度 ε",
        ['rank', 'method', 'noise', 'error_final', 'seconds'],
    ),
    'residual_vs_terms': (
        "貪婪演算法加入第 terms 項後的殘差 F 與累計計算時間 (秒)；由檢查點還原的項 seconds 為 nan",
        ['terms', 'F', 'seconds'],
    ),
    'norm_vs_time': (
        "物理表象中近似解的 L² 範數 ‖ψ(t_k)‖ (精確解恆為 ‖u₀‖)",
        ['t', 'norm'],
    ),
    'density': (
        "機率密度 |ψ(t, x)|²：greedy 為波包近似，reference 為頻譜參考解",
        ['t', 'x', 'greedy_density', 'reference_density'],
    ),
    'wavepacket_error_vs_time': (
        "相對最細頻譜參考解的 L² 誤差；method 為 greedy-<項數> 或 spectral-<每方向模態數>",
        ['method', 't', 'l2_error'],
    ),
    'spectral_timing': (
        "Strang 正弦頻譜法的計算時間 (秒)，modes 為每個方向的模態數",
        ['modes', 'seconds'],
    ),
    'greedy_timing': (
        "貪婪演算法達到指定項數的累計計算時間 (秒)，只含本次執行計時的項",
        ['terms', 'seconds'],
    ),
}


def singular_value_columns(count):
    return ['t'] + [f"sigma_{i + 1}" for i in range(count)]
