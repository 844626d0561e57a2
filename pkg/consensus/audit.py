"""Offline inspection of a node's DAG: DOT export and invariant audit."""

from typing import Dict, List, Tuple

from consensus.engine import derive_creator_table, open_merge_flag_tables, strict_merge_flag_tables
from consensus.store import EventStore


def export_dag(store: EventStore, format: str = 'dot') -> bytes:
    """Render the DAG in Graphviz DOT. Solid edges point to self-parents, dashed to other-parents."""
    if format != 'dot':
        raise ValueError(f'Unsupported DAG export format: {format!r}')
    lines = ['digraph aca {', '  rankdir=BT;']
    events = list(store)
    for event in events:
        label = (
            f'{event.creator.hex()[:8]} h={event.height} f={event.frame} '
            f'ts={event.lamport_timestamp}{" root" if event.is_root else ""}'
        )
        shape = 'doublecircle' if event.is_root else 'circle'
        lines.append(f'  "{event.id.hex()}" [label="{label}", shape={shape}];')
    for event in events:
        if event.is_leaf:
            continue
        lines.append(f'  "{event.id.hex()}" -> "{event.self_parent_id.hex()}" [style=solid];')
        lines.append(f'  "{event.id.hex()}" -> "{event.other_parent_id.hex()}" [style=dashed];')
    lines.append('}')
    return ('\n'.join(lines) + '\n').encode('ascii')


def replay_frames(store: EventStore, majority: int) -> Dict[bytes, Tuple[int, bool]]:
    """Recompute (frame, is_root) for every stored event from the DAG alone.

    Works without finalisation or stripping. Each event keeps only the
    table entries at or above its own frame, which is all its descendants
    can ever consult.
    """
    tables = {}
    derived = {}
    for event in sorted(store, key=lambda item: (item.lamport_timestamp, item.id)):
        if event.is_leaf:
            tables[event.id] = {event.id: event.frame}
            derived[event.id] = (event.frame, True)
            continue
        self_frame = derived[event.self_parent_id][0]
        other_frame = derived[event.other_parent_id][0]
        self_table, other_table = tables[event.self_parent_id], tables[event.other_parent_id]
        if self_frame == other_frame:
            roots = strict_merge_flag_tables(self_frame, self_table, other_table)
            is_root = len(derive_creator_table(roots, self_frame, store)) >= majority
            frame = self_frame + 1 if is_root else self_frame
        elif self_frame > other_frame:
            is_root, frame = False, self_frame
        else:
            is_root, frame = True, other_frame
        table = open_merge_flag_tables(frame, self_table, other_table)
        if is_root:
            table[event.id] = frame
        tables[event.id] = table
        derived[event.id] = (frame, is_root)
    return derived


def audit_store(engine) -> List[str]:
    """Check a node's DAG against the structural invariants. Returns one line per violation."""
    store = engine.store
    problems = []
    label = engine.state.me.short_id

    partitioned = 0
    for frame in store.frames():
        for event in store.events_in_frame(frame):
            partitioned += 1
            if event.frame != frame:
                problems.append(f'{label}: {event.short_id} indexed under frame {frame} but has {event.frame}')
    if partitioned != len(store):
        problems.append(f'{label}: frames hold {partitioned} events, store holds {len(store)}')

    for creator in store.creators():
        for height, event in enumerate(store.chain_of(creator)):
            if event.height != height:
                problems.append(f'{label}: {event.short_id} sits at chain position {height} with height {event.height}')

    derived = replay_frames(store, engine.root_majority)
    for event in store:
        if event.id not in derived:
            problems.append(f'{label}: {event.short_id} could not be replayed')
            continue
        if (event.frame, event.is_root) != derived[event.id]:
            problems.append(
                f'{label}: {event.short_id} has frame/root {(event.frame, event.is_root)}, '
                f'replay gives {derived[event.id]}'
            )
        for root_id, frame in event.flag_table.items():
            root = store.get_event(root_id)
            if root is None or not root.is_root or root.frame != frame:
                problems.append(f'{label}: flag table of {event.short_id} names non-root {root_id.hex()[:8]}')
        if event.is_leaf:
            continue
        self_parent = store.get_event(event.self_parent_id)
        other_parent = store.get_event(event.other_parent_id)
        if event.lamport_timestamp <= max(self_parent.lamport_timestamp, other_parent.lamport_timestamp):
            problems.append(f'{label}: {event.short_id} does not advance past its parents')
        if event.height != self_parent.height + 1 or event.creator != self_parent.creator:
            problems.append(f'{label}: {event.short_id} breaks its creator chain')
        if event.frame < max(self_parent.frame, other_parent.frame):
            problems.append(f'{label}: {event.short_id} is in an earlier frame than a parent')
    return problems
