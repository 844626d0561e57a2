from pathlib import Path

from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import BaseCommand, CommandError

from consensus.exceptions import ReplayMismatch
from consensus.models import SimulationRun
from consensus.simulation import SWEEP_BASE, replay_report, run_simulation, run_threaded, summarise, sweep

from ._config import add_config_arguments, load_config


def _int_list(value):
    try:
        return [int(part) for part in value.split(',') if part.strip()]
    except ValueError:
        raise CommandError(f'Expected comma-separated integers, got {value!r}') from None


class Command(BaseCommand):
    help = 'Run, sweep or replay deterministic ACA network simulations'

    def add_arguments(self, parser):
        subcommands = parser.add_subparsers(dest='action', required=True)

        run = subcommands.add_parser('run', help='Run one simulation and print its report')
        add_config_arguments(run)
        run.add_argument('--report', type=str, help='Also write the report to this file')
        run.add_argument('--save', action='store_true', help='Record the run for later replay')
        run.add_argument('--threaded', action='store_true', help='Run on threads instead of the scheduler')
        run.add_argument('--iterations', type=int, default=20, help='Heartbeats per node in threaded mode')

        sweep_parser = subcommands.add_parser('sweep', help='Run many seeds and network sizes')
        add_config_arguments(sweep_parser)
        sweep_parser.add_argument('--nodes', type=_int_list, default=[3, 4, 5, 7])
        sweep_parser.add_argument('--seeds', type=int, default=20, help='Seeds 1..N per network size')
        sweep_parser.add_argument('--archive', action='store_true', help='Store failing runs as counterexamples')
        sweep_parser.add_argument('--audit-every', type=int, default=1, help='Audit one run in every N')

        replay = subcommands.add_parser('replay', help='Re-run a saved simulation and compare reports')
        replay.add_argument('schedule_digest', type=str)

    def handle(self, *args, **options):
        action = options['action']
        if action == 'run':
            self._run(options)
        elif action == 'sweep':
            self._sweep(options)
        else:
            self._replay(options['schedule_digest'])

    def _run(self, options):
        config = load_config(options)
        if options['threaded']:
            result = run_threaded(config, iterations=options['iterations'])
            self.stdout.write(f"agreement={'pass' if result.agreement.passed else 'fail'}")
            self.stdout.write(f'common_frames={result.agreement.common_frames}')
            for error in result.errors:
                self.stdout.write(self.style.ERROR(error))
            if not result.agreement.passed or result.errors:
                raise CommandError(result.agreement.describe())
            return

        report = run_simulation(config)
        text = report.render()
        self.stdout.write(text, ending='')
        if options['report']:
            Path(options['report']).write_text(text)
        if options['save']:
            SimulationRun.record(report)
            self.stdout.write(self.style.SUCCESS(f'Saved run {report.schedule_digest}'))
        if not report.passed:
            raise CommandError(f'Simulation failed: {report.agreement.describe()}')

    def _sweep(self, options):
        base = load_config(options, SWEEP_BASE)
        try:
            reports = sweep(base, options['nodes'], range(1, options['seeds'] + 1), options['audit_every'])
        except ImproperlyConfigured as exc:
            raise CommandError(str(exc)) from exc
        self.stdout.write(summarise(reports).to_string(index=False))
        failures = [report for report in reports if not report.passed]
        for report in failures:
            self.stdout.write(self.style.ERROR(
                f'n={report.config.n_nodes} seed={report.config.rng_seed}: '
                f'{report.agreement.describe()}; {len(report.violations)} violations'
            ))
            if options['archive']:
                SimulationRun.record(report, archived=True)
        if failures:
            raise CommandError(f'{len(failures)} of {len(reports)} runs failed')
        self.stdout.write(self.style.SUCCESS(f'All {len(reports)} runs passed'))

    def _replay(self, digest):
        saved = SimulationRun.objects.filter(schedule_digest=digest).first()
        if saved is None:
            raise CommandError(f'No saved run with schedule digest {digest}')
        try:
            replay_report(saved.config_text, saved.report_text)
        except ReplayMismatch as exc:
            raise CommandError(str(exc)) from exc
        self.stdout.write(self.style.SUCCESS(f'Replay of {digest} matches the saved report'))
