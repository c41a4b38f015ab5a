"""Click parameter types shared by the ``wanco`` commands."""
import os
import re
import tempfile

import click
import requests
import validators

from .errors import ConfigError


def is_url(value):
    return isinstance(value, str) and bool(validators.url(value))


def config_path(source):
    """Local path of a config source, downloading http(s) URLs first.

    A download lands in a temporary ``.yaml`` file that is removed when the
    current click context closes. Local paths are returned unchanged; a
    missing file is reported when the config is read.

    Raises:
        ConfigError: If the URL cannot be fetched or does not return 200 OK
    """
    if not is_url(source):
        return source
    try:
        r = requests.get(source, timeout=30)
    except requests.RequestException as e:
        raise ConfigError(f"error while fetching {source}: {e}", key="config") from e
    if not r.ok:
        raise ConfigError(f"url {source} does not return 200 OK (status {r.status_code})", key="config")

    with tempfile.NamedTemporaryFile(mode="wb", suffix=".yaml", delete=False) as tmpfile:
        tmpfile.write(r.content)
        path = tmpfile.name

    ctx = click.get_current_context(silent=True)
    if ctx is not None:
        def cleanup():
            try:
                os.unlink(path)
            except OSError:
                pass
        ctx.call_on_close(cleanup)
    return path


class ConfigSourceParamType(click.Path):
    """A run config given as a local path or an http(s) URL.

    URLs pass through unchanged and are fetched by :func:`config_path` once
    the command runs, so fetch failures and missing files surface as
    configuration errors rather than usage errors.

    Example:
        >>> @click.command()
        >>> @click.option('--config', type=ConfigSourceParamType())
        >>> def cmd(config):
        ...     print(open(config_path(config)).read())
        >>> # Valid inputs:
        >>> # runs/gl.yaml
        >>> # https://example.com/gl.yaml
    """

    name = "config"

    def __init__(self, **kwargs):
        kwargs.setdefault("dir_okay", False)
        super().__init__(**kwargs)

    def convert(self, value, param, ctx):
        if is_url(value):
            return value
        return super().convert(value, param, ctx)


class ChoiceCommaSeparated(click.ParamType):
    """Comma-separated values, each validated against ``choices``.

    ``*`` or ``all`` selects every choice when ``allow_wildcard`` is set.
    Matching ignores case unless ``case_sensitive`` is set; the canonical
    spelling from ``choices`` is returned either way, in input order and
    without repeats.

    Example:
        >>> ChoiceCommaSeparated(['sin', 'gauss']).convert('GAUSS, sin', None, None)
        ['gauss', 'sin']
    """

    name = "choice-comma-separated"

    def __init__(self, choices, allow_wildcard=True, case_sensitive=False):
        self.choices = list(choices)
        self.allow_wildcard = allow_wildcard
        self.case_sensitive = case_sensitive

    def _canonical(self, value):
        for choice in self.choices:
            if choice == value or (not self.case_sensitive and choice.lower() == value.lower()):
                return choice
        return None

    def convert(self, value, param, ctx):
        if not value:
            return []
        if not isinstance(value, list):
            value = [ss.strip() for ss in value.split(",") if ss.strip()]

        if self.allow_wildcard and any(val in ("*", "all") for val in value):
            return list(self.choices)

        out = []
        for val in value:
            choice = self._canonical(val)
            if choice is None:
                self.fail(f"{val!r} is not one of {', '.join(self.choices)}.", param, ctx)
            if choice not in out:
                out.append(choice)
        return out


class GridSizesParamType(click.ParamType):
    """Nodes per axis of an evaluation grid: ``1000x1000``, ``41,41,41`` or ``1001``.

    Example:
        >>> GridSizesParamType().convert('201x201', None, None)
        (201, 201)
    """

    name = "grid-sizes"

    def convert(self, value, param, ctx):
        if isinstance(value, (tuple, list)):
            parts = list(value)
        else:
            parts = [p for p in re.split(r"[x,]", str(value).strip().lower()) if p]
        try:
            sizes = tuple(int(p) for p in parts)
        except (TypeError, ValueError):
            self.fail(f"{value!r} is not a list of integers such as 1000x1000", param, ctx)
        if not sizes or min(sizes) < 2:
            self.fail(f"{value!r} needs at least 2 nodes on every axis", param, ctx)
        return sizes
