"""
Photoacoustic Toolkit - Command Registry

Subcommands register themselves with the @register decorator; the CLI
builds its argparse parser from the registry.
"""

import argparse
from dataclasses import dataclass
from typing import Callable, List, Optional


# ---------------------------------------------------------------------------
# Command registry
# ---------------------------------------------------------------------------

@dataclass
class CommandInfo:
    """Metadata for a registered subcommand."""
    name: str
    run: Callable
    help: str = ""
    order: int = 100
    add_arguments: Optional[Callable] = None


_registry: List[CommandInfo] = []


def register(
    name: str,
    *,
    help: str = "",
    order: int = 100,
    arguments: Optional[Callable] = None,
):
    """Decorator that registers a function as a CLI subcommand.

    ``arguments`` receives the subparser and adds the command's own flags.
    The command itself is called with the parsed namespace and returns an
    exit code.

    Usage::

        from command_registry import register

        @register("mesh-gen", help="Generate a disk mesh",
                  arguments=lambda p: p.add_argument("--out"))
        def cmd_mesh_gen(args):
            ...
            return 0
    """
    def decorator(func: Callable) -> Callable:
        if any(info.name == name for info in _registry):
            raise ValueError(f"command '{name}' is already registered")
        _registry.append(CommandInfo(
            name=name,
            run=func,
            help=help,
            order=order,
            add_arguments=arguments,
        ))
        return func
    return decorator


def registered_commands() -> List[CommandInfo]:
    return sorted(_registry, key=lambda c: c.order)


def find_command(name: str) -> Optional[CommandInfo]:
    for info in _registry:
        if info.name == name:
            return info
    return None


# ---------------------------------------------------------------------------
# Parser construction
# ---------------------------------------------------------------------------

def build_parser(
    description: str,
    common: Optional[Callable[[argparse.ArgumentParser], None]] = None,
) -> argparse.ArgumentParser:
    """Top-level parser with one subparser per registered command.

    ``common`` adds the flags every subcommand shares.
    """
    parser = argparse.ArgumentParser(description=description)
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for info in registered_commands():
        sub = subparsers.add_parser(info.name, help=info.help, description=info.help)
        if common is not None:
            common(sub)
        if info.add_arguments is not None:
            info.add_arguments(sub)
        sub.set_defaults(handler=info.run)
    return parser
