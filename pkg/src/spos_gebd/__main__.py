import os
import sys


def main(argv=None) -> int:
    # BLAS reads its thread count once, at numpy import time
    threads = os.environ.get("SPOS_THREADS", "0")
    if threads.isdigit() and int(threads) > 0:
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    from .cli import main as cli_main

    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
