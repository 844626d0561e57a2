import threading

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.core.servers.basehttp import get_internal_wsgi_application, run

from consensus.node import get_local_node


class Command(BaseCommand):
    help = 'Run this process as a gossip node: heartbeats in a thread, sync replies over HTTP'

    def add_arguments(self, parser):
        parser.add_argument('addrport', nargs='?', help='host:port to listen on; defaults to this node\'s peer address')
        parser.add_argument('--heartbeat-ms', type=int, default=None)

    def handle(self, *args, **options):
        node = get_local_node()
        addrport = options['addrport'] or node.engine.state.me.net_address
        if not addrport or ':' not in addrport:
            raise CommandError('Give host:port or set ACA_PEER_ADDRESSES')
        host, port = addrport.rsplit(':', 1)
        heartbeat_ms = options['heartbeat_ms'] if options['heartbeat_ms'] is not None else settings.ACA_HEARTBEAT_MS

        stop = threading.Event()
        heartbeat = threading.Thread(
            target=node.run_procedure_a, args=(stop, heartbeat_ms / 1000.0), daemon=True,
        )
        heartbeat.start()
        self.stdout.write(self.style.SUCCESS(
            f'Node {node.engine.state.me.short_id} listening on {host}:{port}'
        ))
        try:
            run(host, int(port), get_internal_wsgi_application(), threading=True)
        except KeyboardInterrupt:
            pass
        finally:
            stop.set()
