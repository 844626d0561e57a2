from pathlib import Path
from typing import Optional

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import CommandError

from consensus.simulation import SimConfig


def add_config_arguments(parser):
    parser.add_argument('--config', type=str, help='Simulation config file (key = value lines)')
    parser.add_argument(
        '--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
        help='Override one config value; may be repeated',
    )


def load_config(options, base: Optional[SimConfig] = None) -> SimConfig:
    overrides = {}
    for item in options.get('overrides') or []:
        if '=' not in item:
            raise CommandError(f'--set expects KEY=VALUE, got {item!r}')
        key, value = item.split('=', 1)
        overrides[key.strip()] = value.strip()
    text = f'heartbeat = {settings.ACA_SIM_HEARTBEAT}\n'
    if options.get('config'):
        path = Path(options['config'])
        if not path.exists():
            raise CommandError(f'Config file {path} does not exist')
        text += path.read_text()
    try:
        return SimConfig.from_text(text, overrides, base)
    except ImproperlyConfigured as exc:
        raise CommandError(str(exc)) from exc
