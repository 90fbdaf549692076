"""
MQC Localization Simulator Version Information
バージョン情報を管理するモジュール
"""

# バージョン情報
__version__ = "0.3.0"
__update_date__ = "2026-10-18"

# 最新の追加機能リスト
LATEST_FEATURES = [
    # v0.3.0 - 平衡実験とレポート
    "Equilibrium experiment: clusters prepared by N0 unperturbed cycles, relative plateau spread and regime labels",
    "Power-law fit of K_loc(p) with stderr, written as a plain-text report",
    "Byte-stable SVG heatmaps of A_M(n) with support-width metadata",
    # v0.2.0 - 高速化
    "Parity-sector eigendecomposition and Heisenberg trajectories without re-diagonalising",
    "Trotter backend with symmetric two-site gate sweeps",
    "Segmented cycle mode (tau0 under H_0, then tau_sigma under H_dd)",
    # v0.1.0 - 基本機能
    "Zeeman basis, dipolar and double-quantum Hamiltonians",
    "Time-reversal MQC encoding with FFT and direct coherence-block extraction",
    "Cluster size from the second moment of the coherence spectrum",
]


def get_version_info() -> str:
    """
    バージョン情報を整形して返す

    Returns:
        str: 整形されたバージョン情報メッセージ
    """
    features_text = "\n".join([f"  - {feature}" for feature in LATEST_FEATURES])

    return f"""MQC Localization Simulator {__version__} ({__update_date__})

Features:
{features_text}
"""
