"""Builds the hiersparse_py extension by delegating to cargo.

Install from the repository root with:
    pip install --no-build-isolation ./python
"""

import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

REPO_ROOT = Path(__file__).resolve().parent.parent


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "hiersparse-python"],
            cwd=REPO_ROOT,
            check=True,
        )
        suffix = ".dylib" if sys.platform == "darwin" else ".so"
        built = REPO_ROOT / "target" / "release" / f"libhiersparse_py{suffix}"
        if not built.exists():  # windows drops the lib prefix
            built = REPO_ROOT / "target" / "release" / "hiersparse_py.dll"
        out = Path(self.get_ext_fullpath(ext.name))
        out.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(built, out)


setup(
    name="hiersparse",
    version="0.1.0",
    description="Sparse logistic regression with tree-structured group penalties",
    ext_modules=[Extension("hiersparse_py", sources=[])],
    cmdclass={"build_ext": CargoBuildExt},
    zip_safe=False,
)
