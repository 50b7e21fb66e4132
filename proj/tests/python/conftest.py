# Copyright 2026 The SiA Authors
# SPDX-License-Identifier: Apache-2.0

import os
import shutil

import pytest


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("SIA_CLI") or shutil.which("sia")
    if not path:
        pytest.skip("sia executable not found")
    return path
