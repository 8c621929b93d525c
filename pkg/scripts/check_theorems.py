"""Run every property suite and print one line per property."""

import argparse

from pidkd.verify import run_suite


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    res = run_suite("all", n=args.n, seed=args.seed)
    for suite in res["suites"]:
        for p in suite["properties"]:
            flag = "ok  " if p["passed"] else "FAIL"
            print(f"{flag} {suite['suite']:<8} {p['name']:<55} n={p['n']:<4} max dev {p['max_deviation']:.2e}")
    print(f"{'all passed' if res['passed'] else 'FAILURES'} in {res['elapsed_s']:.1f}s")
    raise SystemExit(0 if res["passed"] else 1)


if __name__ == "__main__":
    main()
