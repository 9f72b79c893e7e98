import pytest

from pfr.experiments import case_study_params, case_study_spec


@pytest.fixture
def params():
    return case_study_params()


@pytest.fixture
def spec():
    return case_study_spec(two_input=True)


@pytest.fixture
def spec_single():
    return case_study_spec(two_input=False)
