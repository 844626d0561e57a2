import logging

from django.http import HttpResponse, HttpResponseBadRequest, HttpResponseForbidden, JsonResponse
from django.views import View

from consensus.exceptions import MalformedMessage, UnknownPeer
from consensus.ledger import ledger_digest
from consensus.node import get_local_ledger, get_local_node

logger = logging.getLogger(__name__)


class SyncView(View):
    """Procedure B over HTTP: wire request bytes in, wire reply bytes out."""

    def post(self, request):
        node = get_local_node()
        try:
            reply = node.handle_request_bytes(request.body)
        except UnknownPeer as exc:
            logger.warning('Refused sync request: %s', exc)
            return HttpResponseForbidden(str(exc))
        except MalformedMessage as exc:
            logger.warning('Malformed sync request: %s', exc)
            return HttpResponseBadRequest(str(exc))
        return HttpResponse(reply, content_type='application/octet-stream')


class TransactionView(View):
    def post(self, request):
        if not request.body:
            return HttpResponseBadRequest('Empty transaction')
        get_local_node().engine.submit(request.body)
        return JsonResponse({'queued': True}, status=202)


class FinalOrderView(View):
    def get(self, request):
        engine = get_local_node().engine
        with engine.lock:
            lines = [line for order in engine.store.finalised for line in order.export_lines(engine.store)]
        return HttpResponse('\n'.join(lines) + ('\n' if lines else ''), content_type='text/plain')


class StatusView(View):
    def get(self, request):
        engine = get_local_node().engine
        ledger = get_local_ledger()
        with engine.lock:
            status = {
                'peer': engine.state.me.id.hex(),
                'lamport': engine.state.lamport,
                'height': engine.state.height,
                'current_frame': engine.state.current_frame,
                'last_finalised_frame': engine.state.last_finalised_frame,
                'events': len(engine.store),
                'orphans': engine.store.orphan_count,
            }
            if ledger is not None:
                status['ledger_digest'] = ledger_digest(ledger).hex()
        return JsonResponse(status)
