#!/usr/bin/env python3
"""Run the acceptance criteria and print one pass/fail line per criterion.

Exit code 0 when everything passes, 1 otherwise.
"""

import sys

from solarpen import acceptance


def main() -> int:
    results = acceptance.run_all()
    failed = [r for r in results if not r.passed]
    total = sum(r.elapsed for r in results)
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed "
          f"in {total:.1f}s")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
