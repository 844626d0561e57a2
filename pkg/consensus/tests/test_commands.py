from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from consensus.crypto import network_identities
from consensus.ledger import load_genesis
from consensus.models import SimulationRun


def run(*args):
    out = StringIO()
    call_command(*args, stdout=out)
    return out.getvalue()


@pytest.mark.django_db
def test_saved_runs_replay_identically(tmp_path):
    report_path = tmp_path / 'report.txt'
    output = run('sim', 'run', '--set', 'n_nodes=2', '--set', 'max_steps=100',
                 '--report', str(report_path), '--save')
    assert 'agreement=pass' in output
    saved = SimulationRun.objects.get()
    assert saved.agreement_passed
    assert report_path.read_text() == saved.report_text
    assert 'matches' in run('sim', 'replay', saved.schedule_digest)


@pytest.mark.django_db
def test_replaying_an_unknown_run_fails():
    with pytest.raises(CommandError):
        run('sim', 'replay', 'f' * 64)


@pytest.mark.django_db
def test_sweep_prints_a_summary():
    output = run('sim', 'sweep', '--nodes', '2,3', '--seeds', '2', '--set', 'max_steps=150')
    assert 'All 4 runs passed' in output
    assert 'min_frames' in output
    assert not SimulationRun.objects.exists()


def test_sweep_refuses_a_zero_audit_interval():
    with pytest.raises(CommandError):
        run('sim', 'sweep', '--nodes', '3', '--seeds', '1', '--audit-every', '0')


def test_config_file_and_overrides(tmp_path):
    config = tmp_path / 'sim.conf'
    config.write_text('n_nodes = 3\nmax_steps = 150\nselector_mode = random\n')
    output = run('sim', 'run', '--config', str(config), '--set', 'rng_seed=4')
    assert 'n_nodes = 3' in output
    assert 'rng_seed = 4' in output
    assert 'selector_mode = random' in output


@pytest.mark.parametrize('args', [
    ('--set', 'oops'),
    ('--set', 'n_nodes=1'),
    ('--config', '/nonexistent/sim.conf'),
])
def test_bad_configuration_is_a_command_error(args):
    with pytest.raises(CommandError):
        run('sim', 'run', *args)


def test_threaded_run_reports_agreement():
    output = run('sim', 'run', '--threaded', '--iterations', '5', '--set', 'n_nodes=3')
    assert 'agreement=pass' in output


def test_dag_export_writes_dot(tmp_path):
    target = tmp_path / 'dag.dot'
    run('dag', 'export', '--set', 'n_nodes=3', '--set', 'max_steps=150', '--node', '2', '--output', str(target))
    assert target.read_text().startswith('digraph aca {')
    assert run('dag', 'export', '--set', 'n_nodes=2', '--set', 'max_steps=50').startswith('digraph aca {')
    with pytest.raises(CommandError):
        run('dag', 'export', '--set', 'n_nodes=2', '--set', 'max_steps=50', '--node', '5')


def test_genesis_file_loads_back_for_every_peer(tmp_path, settings):
    settings.ACA_DEFAULT_BALANCE = 250
    target = tmp_path / 'genesis.txt'
    assert 'Wrote 3 accounts' in run('genesis', '--network-seed', 'demo', '--size', '3', '--output', str(target))
    balances = load_genesis(target)
    assert balances == {key.peer_id: 250 for key in network_identities('demo', 3)}
    assert run('genesis', '--network-seed', 'demo', '--size', '3') == target.read_text()


@pytest.mark.parametrize('args', [
    ('--size', '3'),
    ('--network-seed', 'demo', '--size', '1'),
    ('--network-seed', 'demo', '--size', '3', '--balance', '-5'),
])
def test_genesis_needs_a_valid_network(args, settings):
    settings.ACA_NETWORK_SEED = None
    with pytest.raises(CommandError):
        run('genesis', *args)


def test_invariant_audit_passes():
    output = run('audit', 'invariants', '--set', 'n_nodes=4', '--set', 'max_steps=200')
    assert 'All invariants hold' in output
    assert output.count('0 violations') == 4
