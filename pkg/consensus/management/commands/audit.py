from django.core.management.base import BaseCommand, CommandError

from consensus.audit import audit_store
from consensus.simulation import Simulator

from ._config import add_config_arguments, load_config


class Command(BaseCommand):
    help = 'Run a simulation and audit every node against the DAG invariants'

    def add_arguments(self, parser):
        subcommands = parser.add_subparsers(dest='action', required=True)
        invariants = subcommands.add_parser('invariants', help='Check frames, roots, clocks and chains')
        add_config_arguments(invariants)

    def handle(self, *args, **options):
        simulator = Simulator(load_config(options))
        simulator.run()
        problems = []
        for node in simulator.nodes:
            found = audit_store(node.engine)
            self.stdout.write(f'node {node.index}: {len(node.engine.store)} events, {len(found)} violations')
            problems += found
        for problem in problems:
            self.stdout.write(self.style.ERROR(problem))
        if problems:
            raise CommandError(f'{len(problems)} invariant violations')
        self.stdout.write(self.style.SUCCESS('All invariants hold'))
