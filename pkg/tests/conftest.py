import pytest

from expsieve.equation import parse_equation


@pytest.fixture(scope="session")
def eq3456():
    return parse_equation("3^x+4^y+5^z=6^w")
