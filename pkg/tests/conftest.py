"""
Pytest configuration and fixtures for the Lua reduction-semantics tests.
"""

import os
import sys
import tempfile
from pathlib import Path
from typing import Dict, Optional, Tuple

import pytest
import yaml

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from lua_semantics.core.machine import Machine, Outcome
from lua_semantics.utils.config_manager import ConfigManager

PROJECT_ROOT = Path(__file__).resolve().parent.parent
CORPUS_DIR = PROJECT_ROOT / "corpus"

# Object-oriented example: a class with a constructor and two methods
ACCOUNT_PROGRAM = b"""
Account = {}
Account.__index = Account

function Account.new(balance)
  return setmetatable({balance = balance}, Account)
end

function Account:deposit(v)
  self.balance = self.balance + v
end

function Account:get()
  return self.balance
end

local acc = Account.new(5)
print(acc:get())
acc:deposit(1)
print(acc:get())
"""

MEMSUM_PROGRAM = b"""
local function memsum(n)
  if n == 0 then return 1 end
  return n + memsum(n - 1)
end
print(memsum(20))
"""


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files."""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield temp_dir


@pytest.fixture
def run_lua():
    """Run a chunk and return its output together with the Outcome."""
    def run(source, fuel: int = 1_000_000, chunk_name: str = "=input") -> Tuple[bytes, Outcome]:
        if isinstance(source, str):
            source = source.encode("utf-8")
        machine = Machine(fuel=fuel)
        outcome = machine.run_source(source, chunk_name)
        return machine.output, outcome
    return run


@pytest.fixture
def lua_file(temp_dir):
    """Write a Lua source file into the temporary directory."""
    def write(source, name: str = "input.lua") -> str:
        path = os.path.join(temp_dir, name)
        data = source.encode("utf-8") if isinstance(source, str) else source
        with open(path, 'wb') as f:
            f.write(data)
        return path
    return write


@pytest.fixture
def corpus_builder(temp_dir):
    """Build a corpus directory from ``{"feature/name": (source, expected, err)}``."""
    def build(cases: Dict[str, Tuple[str, str, Optional[str]]]) -> str:
        root = Path(temp_dir) / "corpus"
        root.mkdir(exist_ok=True)
        for case_id, (source, expected, err) in cases.items():
            feature, name = case_id.split("/")
            directory = root / feature
            directory.mkdir(exist_ok=True)
            (directory / f"{name}.lua").write_text(source, encoding="utf-8")
            (directory / f"{name}.expected").write_text(expected, encoding="utf-8")
            if err is not None:
                (directory / f"{name}.err").write_text(err, encoding="utf-8")
        return str(root)
    return build


@pytest.fixture
def sample_config(temp_dir):
    """Create a sample configuration file."""
    config_path = os.path.join(temp_dir, "config.yaml")
    config = {
        'fuel': 5000,
        'corpus_fuel': 100000,
        'max_print_depth': 3,
        'trace_store_summary': False,
        'parallel': False,
        'max_worker_threads': 2,
        'chunk_name_mode': 'name',
        'log_level': 'WARNING',
    }
    with open(config_path, 'w') as f:
        yaml.dump(config, f)
    return config_path


@pytest.fixture
def config_manager(sample_config):
    """Create a ConfigManager loaded from the sample configuration."""
    return ConfigManager(sample_config)
