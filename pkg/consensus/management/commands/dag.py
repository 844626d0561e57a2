from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from consensus.audit import export_dag
from consensus.simulation import Simulator

from ._config import add_config_arguments, load_config


class Command(BaseCommand):
    help = "Run a simulation and export one node's event DAG"

    def add_arguments(self, parser):
        subcommands = parser.add_subparsers(dest='action', required=True)
        export = subcommands.add_parser('export', help='Write the DAG in Graphviz DOT')
        add_config_arguments(export)
        export.add_argument('--node', type=int, default=0)
        export.add_argument('--format', type=str, default='dot', choices=['dot'])
        export.add_argument('--output', type=str, help='File to write; stdout when omitted')

    def handle(self, *args, **options):
        simulator = Simulator(load_config(options))
        simulator.run()
        if not 0 <= options['node'] < len(simulator.nodes):
            raise CommandError(f"Node {options['node']} does not exist")
        data = export_dag(simulator.nodes[options['node']].engine.store, options['format'])
        if options['output']:
            Path(options['output']).write_bytes(data)
            self.stdout.write(self.style.SUCCESS(f"Wrote {options['output']}"))
        else:
            self.stdout.write(data.decode('ascii'), ending='')
