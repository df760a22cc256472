import pytest

from fejsolve import verify


@pytest.fixture(scope="session")
def suite():
    """The shipped run matrix, executed once per test session."""
    s = verify.run_suite(verify.load_default_matrix())
    errors = {n: e["error"] for n, e in s.items() if "error" in e}
    assert not errors, f"suite runs failed: {errors}"
    return s
