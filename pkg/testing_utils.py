"""
Standalone runner shared by the test modules.

Each test_*.py file runs under pytest, and also directly with
`python test_xxx.py`, printing a pass/fail summary per test.

測試模塊共用的獨立運行器。
"""

import contextlib
import inspect
import pathlib
import tempfile
import traceback
import warnings

import pytest


def _call(test_func):
    parameters = inspect.signature(test_func).parameters
    with contextlib.ExitStack() as stack:
        kwargs = {}
        if "tmp_path" in parameters:
            kwargs["tmp_path"] = pathlib.Path(stack.enter_context(tempfile.TemporaryDirectory()))
        if "monkeypatch" in parameters:
            kwargs["monkeypatch"] = stack.enter_context(pytest.MonkeyPatch.context())
        test_func(**kwargs)


def run_standalone(title, tests):
    """
    Run test functions outside pytest.

    Tests that take a tmp_path argument get a fresh temporary directory, and
    a monkeypatch argument gets a patcher undone after the test.

    Args:
        title: Heading printed before the run
        tests: List of (name, function) pairs

    Returns:
        int: 0 when every test passed, 1 otherwise
    """
    print(f"🚀 {title}")
    print("=" * 60)

    results = {}
    for test_name, test_func in tests:
        print(f"\n🧪 {test_name}...")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                _call(test_func)
            results[test_name] = True
        except Exception as e:
            print(f"❌ {test_name} failed: {e!r}")
            print(f"Traceback: {traceback.format_exc()}")
            results[test_name] = False

    print("\n" + "=" * 60)
    print("📋 Test Results Summary:")
    passed = sum(results.values())
    total = len(results)
    for test_name, result in results.items():
        print(f"{'✅' if result else '❌'} {test_name}: {'PASSED' if result else 'FAILED'}")
    print(f"\n🎯 Overall: {passed}/{total} tests passed ({passed / max(total, 1) * 100:.1f}%)")
    return 0 if passed == total else 1


def module_tests(namespace):
    """(name, function) pairs for every test_* function of a module namespace, in definition order."""
    return [(name.replace("test_", "", 1).replace("_", " "), func)
            for name, func in namespace.items()
            if name.startswith("test_") and inspect.isfunction(func)]
