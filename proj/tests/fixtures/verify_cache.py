"""Validates a cache file with the independent Python implementation.

Exit status 0 on success; prints the failure kind otherwise.
"""

import json
import pathlib
import sys

from reco_cache_py import CacheError, verify_cache


def main() -> int:
    if len(sys.argv) not in (2, 3):
        print("usage: verify_cache.py CACHE [EXPECTED_CHECKSUM_HEX]", file=sys.stderr)
        return 2
    try:
        report = verify_cache(pathlib.Path(sys.argv[1]).read_bytes())
    except CacheError as e:
        print(e, file=sys.stderr)
        return 3
    if len(sys.argv) == 3 and report["checksum"] != sys.argv[2].lower():
        print(f"checksum {report['checksum']} != expected {sys.argv[2]}", file=sys.stderr)
        return 3
    print(json.dumps(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
