"""Builds the Rust extension with cargo and ships it as mlcd._native.

The crates mirror has no maturin/setuptools-rust, so this drives cargo
directly through a custom build_ext command.
"""

import shutil
import subprocess
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

REPO_ROOT = Path(__file__).resolve().parent.parent


class CargoExtension(Extension):
    def __init__(self, name, crate):
        super().__init__(name, sources=[])
        self.crate = crate


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.run(
            [
                "cargo",
                "build",
                "--release",
                "-p",
                ext.crate,
                "--features",
                "extension-module",
            ],
            cwd=REPO_ROOT,
            check=True,
        )
        built = REPO_ROOT / "target" / "release" / "libmlcd_py.so"
        dest = Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built, dest)


setup(
    ext_modules=[CargoExtension("mlcd._native", crate="mlcd-py")],
    cmdclass={"build_ext": CargoBuildExt},
)
