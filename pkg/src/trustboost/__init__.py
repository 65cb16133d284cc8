"""Cross-chain consensus simulator: a BFT view engine run by ledger objects
over an authenticated channel, a consensus-free UTXO variant, and the
impossibility worlds that motivate both."""

__version__ = "0.1.0"

from .core import ConfigError, Quorums, Transaction, TxFactory, check_agreement, check_weak_agreement, quorums_for
from .consensus import build, tb_check, tb_read, tb_submit
from .lite import build_lite, lite_check, lite_submit

__all__ = [
    "__version__", "ConfigError", "Quorums", "Transaction", "TxFactory", "check_agreement",
    "check_weak_agreement", "quorums_for", "build", "tb_check", "tb_read", "tb_submit",
    "build_lite", "lite_check", "lite_submit",
]
