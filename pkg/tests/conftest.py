import pytest

from vdbcode import TailConstraint, sets_fast

# Worked L=3, k=2 example used across the solver and CLI tests.
EXAMPLE_BOUNDS = {1: 22 / 30, 2: 14 / 30, 3: 6 / 30, 4: 4 / 30, 5: 2 / 30, 6: 2 / 30}

EXAMPLE_CONSTRAINT_TEXT = """\
format=vdb-constraint-v1
L=3
k=2
1,22/30
2,14/30
3,6/30
4,4/30
5,2/30
6,2/30
"""

RECIPROCAL_CONSTRAINT_TEXT = """\
format=vdb-constraint-v1
L=3
k=3
1,1/2
2,1/3
3,1/4
4,1/5
5,1/6
6,1/7
7,1/8
"""


@pytest.fixture(scope="session")
def example_constraint():
    return TailConstraint.from_table(3, 2, EXAMPLE_BOUNDS)


@pytest.fixture(scope="session")
def example_sets():
    return sets_fast(3, 2)


@pytest.fixture(scope="session")
def reciprocal_constraint():
    return TailConstraint.reciprocal(3, 3)


@pytest.fixture(scope="session")
def sets_l3k3():
    return sets_fast(3, 3)
