"""Hot loops. Each function is compiled by numba unless EABLOCK_DISABLE_JIT is set."""
