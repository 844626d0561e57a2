from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from consensus.crypto import network_identities
from consensus.ledger import render_genesis


class Command(BaseCommand):
    help = 'Write a TxFlow genesis file giving every peer of the network the same balance'

    def add_arguments(self, parser):
        parser.add_argument('--network-seed', type=str, default=None, help='Defaults to ACA_NETWORK_SEED')
        parser.add_argument('--size', type=int, default=None, help='Defaults to ACA_NETWORK_SIZE')
        parser.add_argument('--balance', type=int, default=None, help='Defaults to ACA_DEFAULT_BALANCE')
        parser.add_argument('--output', type=str, help='File to write; stdout when omitted')

    def handle(self, *args, **options):
        seed = options['network_seed'] or settings.ACA_NETWORK_SEED
        size = options['size'] if options['size'] is not None else settings.ACA_NETWORK_SIZE
        balance = options['balance'] if options['balance'] is not None else settings.ACA_DEFAULT_BALANCE
        if not seed:
            raise CommandError('Give --network-seed or set ACA_NETWORK_SEED')
        if size < 2:
            raise CommandError(f'A network needs at least two peers, not {size}')
        if balance < 0:
            raise CommandError('Balances cannot be negative')

        text = render_genesis({key.peer_id: balance for key in network_identities(seed, size)})
        if options['output']:
            Path(options['output']).write_text(text)
            self.stdout.write(self.style.SUCCESS(f"Wrote {size} accounts to {options['output']}"))
        else:
            self.stdout.write(text, ending='')
