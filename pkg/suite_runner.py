"""
Script entry point shared by the test files
Runs test functions without pytest and prints a PASSED/FAILED summary
"""

import argparse
import sys
import tempfile
import traceback
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence


def _call(test: Callable) -> None:
    # Tests that take pytest's tmp_path get a throwaway directory instead
    if 'tmp_path' in test.__code__.co_varnames[:test.__code__.co_argcount]:
        with tempfile.TemporaryDirectory() as tmp:
            test(Path(tmp))
    else:
        test()


def run_suite(title: str, tests: Dict[str, Callable], only: Optional[str] = None) -> bool:
    """
    Run tests in order and print a summary

    Args:
        title: Banner text
        tests: name -> zero-argument test function (or one taking tmp_path)
        only: Run just this test

    Returns:
        True if every selected test passed
    """
    print("\n" + "=" * 70)
    print(title)
    print("=" * 70)

    if only is not None:
        if only not in tests:
            print(f"[ERROR] unknown test {only!r}; choose from: {', '.join(tests)}")
            return False
        tests = {only: tests[only]}

    results = {}
    for name, test in tests.items():
        try:
            _call(test)
            results[name] = True
        except Exception:
            results[name] = False
            print(f"\n[FAILED] {name}")
            traceback.print_exc()

    print("\n" + "=" * 70)
    print("TEST SUMMARY")
    print("=" * 70)
    for name, passed in results.items():
        status = "✅ PASSED" if passed else "❌ FAILED"
        print(f"{name}: {status}")

    all_passed = all(results.values())
    print("\n" + ("🎉 ALL TESTS PASSED!" if all_passed else "⚠️  SOME TESTS FAILED"))
    print("=" * 70)
    return all_passed


def main(title: str, namespace: Dict, argv: Optional[Sequence[str]] = None) -> None:
    """Collect test_* functions from a module namespace and exit 0/1"""
    parser = argparse.ArgumentParser(description=title)
    parser.add_argument('--only', default=None, help='Run a single test by name')
    args = parser.parse_args(argv)

    tests = {name: fn for name, fn in namespace.items() if name.startswith('test_') and callable(fn)}
    sys.exit(0 if run_suite(title, tests, args.only) else 1)
