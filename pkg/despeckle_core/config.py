import configparser
import glob
import os
from enum import Enum
from pathlib import Path
from types import SimpleNamespace
from typing import Any, Dict, List, Optional, Type, TypeVar, Union, overload

from loguru import logger
from pydantic import ValidationError

from despeckle_core.exceptions import ConfigError

T = TypeVar("T")


class Profile(str, Enum):
    """
    Known override profiles for run configuration files.
    """

    DEVELOP = "develop"  # Small, fast runs while iterating
    TESTING = "testing"  # Unit/integration test fixtures
    ACCEPTANCE = "acceptance"  # Acceptance-scale synthetic runs
    PRODUCTION = "production"  # Clinical stacks


class ConfigManagement:
    """
    Configuration management utility for scanning, loading, and converting run configuration files.

    Files are `.ini` documents; later files override earlier ones key by key, so a base file can be
    specialised by `{name}.{profile}.ini` siblings.
    """

    @staticmethod
    def get_config_files(
        path: Union[str, Path],
        profile: Optional[str] = None,
    ) -> List[str]:
        """
        Resolves the configuration files to load, in loading order.

        The scanning strategy follows these rules:
        1. Base Config: the given file, or every file with a single dot in a given directory
           (e.g. 'run.ini'). Loaded first.
        2. Profile Config: files matching '{name}.{profile}.ini' next to the base files
           (e.g. 'run.acceptance.ini'). Loaded second.

        Files belonging to another known `Profile` are skipped silently. Files with unknown
        profile suffixes are logged as debug.

        Args:
            path: A `.ini` file or a directory holding `.ini` files. **REQUIRED**.
            profile: Optional profile name selecting override files.

        Returns:
            A list of absolute paths, sorted by priority (Base -> Profile).

        Raises:
            ConfigError: if `path` does not exist.

        Example:
            ```python
            from despeckle_core import ConfigManagement

            files = ConfigManagement.get_config_files("config/run.ini", profile="acceptance")
            # ['.../config/run.ini', '.../config/run.acceptance.ini']
            ```
        """
        root = Path(path).resolve()
        if not root.exists():
            raise ConfigError(message=f"Configuration path does not exist: {root}")

        target = profile.lower() if profile else None
        valid_profiles = {p.value for p in Profile}

        if root.is_file():
            config_dir = root.parent
            base_names = [root.name]
        else:
            config_dir = root
            base_names = [
                os.path.basename(f)
                for f in sorted(glob.glob(str(config_dir / "*.ini")))
                if ConfigManagement.__is_base_config_file(os.path.basename(f))
            ]

        base_files = [str(config_dir / name) for name in base_names]
        profile_files = []
        stems = {name.rsplit(".", 1)[0] for name in base_names}

        for file_path in sorted(glob.glob(str(config_dir / "*.ini"))):
            filename = os.path.basename(file_path)
            if ConfigManagement.__is_base_config_file(filename):
                continue
            stem = filename.split(".", 1)[0]
            if stem not in stems:
                continue

            candidate = ConfigManagement.__get_configuration_profile(filename)
            if candidate == target:
                profile_files.append(file_path)
            elif candidate in valid_profiles:
                # Valid profile file, but not for the selected profile. Skip silently.
                pass
            else:
                logger.debug(f"Ignored config file (unknown profile/format): {file_path}")

        return base_files + profile_files

    @staticmethod
    def load_ini(files: List[Union[str, Path]]) -> Dict[str, Any]:
        """
        Reads and merges `.ini` files into a nested dictionary.

        Dotted section names become nested keys, so `[ica.fastica]` lands in
        `config["ica"]["fastica"]`. Values stay strings; typed conversion is the model's job.

        Raises:
            ConfigError: on malformed ini syntax.
        """
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # keep key case
        try:
            parser.read([str(f) for f in files], encoding="utf-8")
        except configparser.Error as e:
            raise ConfigError(message=f"Malformed configuration: {e}") from e

        merged: Dict[str, Any] = {}
        for section in parser.sections():
            node = merged
            for part in section.split("."):
                node = node.setdefault(part, {})
            node.update(dict(parser.items(section)))
        return merged

    @overload
    @staticmethod
    def provide_config(config: dict) -> SimpleNamespace: ...

    @overload
    @staticmethod
    def provide_config(config: dict, model: Type[T]) -> T: ...

    @staticmethod
    def provide_config(config: dict = None, model: Type[T] = None) -> Union[SimpleNamespace, T]:
        """
        Converts a configuration dictionary into a structured object.

        Supports two modes:
        1. **SimpleNamespace mode** (default): Returns a SimpleNamespace for dot notation access.
        2. **Pydantic model mode**: Pass a Pydantic model class to get type-safe, validated config.

        Args:
            config: The configuration dictionary to convert.
            model: Optional Pydantic model class. If provided, returns an instance of this model.

        Returns:
            SimpleNamespace if no model provided, otherwise an instance of the model.

        Raises:
            ConfigError: if the model rejects the configuration (unknown keys included).

        Example:
            ```python
            from despeckle_core import ConfigManagement, PipelineConfig

            raw = ConfigManagement.load_ini(ConfigManagement.get_config_files("run.ini"))
            config = ConfigManagement.provide_config(raw, PipelineConfig)
            print(config.run.subset_sizes)  # [5, 10, ...]
            ```
        """
        if config is None:
            config = {}

        # Pydantic model mode: delegate to Pydantic for validation and type coercion
        if model is not None:
            try:
                return model(**config)
            except ValidationError as e:
                raise ConfigError(message=f"Invalid configuration: {e}", data=e.errors()) from e

        # SimpleNamespace mode: recursive conversion
        def _convert(value):
            if isinstance(value, dict):
                return SimpleNamespace(**{k: _convert(v) for k, v in value.items()})
            elif isinstance(value, list):
                return [_convert(item) for item in value]
            return value

        return _convert(config)

    @staticmethod
    def __is_base_config_file(filename: str) -> bool:
        """
        Checks if a filename represents a base configuration file.

        Base files are identified by having one dot in their name.
        """
        return filename.count(".") == 1

    @staticmethod
    def __get_configuration_profile(filename: str) -> str:
        """
        Extracts the profile segment from a configuration filename.

        Expected format: {name}.{profile}.ini
        """
        parts = filename.split(".")
        # Caller ensures at least 2 dots by checking __is_base_config_file first.
        return parts[-2].lower()
