import os

import pytest

from sphereshadow.data import synth_dataset

SMALL_MODEL = """\
dim = 8
num_heads = 2
window_size = 4
num_blocks = 2
embed_patch = 4
decoder_blocks = 1
patch_size = 16
"""


@pytest.fixture(scope="session")
def small_set(tmp_path_factory):
    """24 synthetic 32x32 images, 4 held out."""
    root = tmp_path_factory.mktemp("small_set")
    synth_dataset(str(root), 24, 32, seed=3, test_count=4, patch=16)
    return root


@pytest.fixture(scope="session")
def desk_set(tmp_path_factory):
    """The 200-image 64x64 synthetic set with a 20-image held-out split."""
    root = tmp_path_factory.mktemp("desk_set")
    synth_dataset(str(root), 200, 64, seed=7)
    return root


def write_config(folder, manifest, extra="", **overrides):
    """Small-model config under ``folder`` pointing at ``manifest``."""
    lines = [f"train_manifest = {manifest}", "output_dir = run", "checkpoint_dir = ckpt"]
    lines += [f"{k} = {v}" for k, v in overrides.items()]
    path = os.path.join(str(folder), "train.cfg")
    with open(path, "w") as fh:
        fh.write(SMALL_MODEL + "\n".join(lines) + "\n" + extra)
    return path


# acceptance tests append one "[PASS]/[FAIL] criterion N: ..." line each
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
