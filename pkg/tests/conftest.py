import pytest

from attlab.passlog import write_passlog
from attlab.synth import default_catalog, synth_pass


@pytest.fixture(scope="session")
def catalog_logs():
    return [synth_pass(sc) for sc in default_catalog()]


@pytest.fixture(scope="session")
def catalog_dir(tmp_path_factory, catalog_logs):
    d = tmp_path_factory.mktemp("catalog")
    paths = []
    for log in catalog_logs:
        p = d / f"{log.pass_id}.csv"
        write_passlog(log, p)
        paths.append(p)
    return d, paths
