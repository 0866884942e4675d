import dataclasses
import json

import numpy as np

from django.core.serializers.json import DjangoJSONEncoder

from .exprtree import ExprNode, FunctionSet, to_sexpr

__all__ = [
    'ReportEncoder',
    'dumps',
    'flatten',
    'serialize',
]


class ReportEncoder(DjangoJSONEncoder):
    """
    JSON encoder for run reports: DjangoJSONEncoder (dates, decimals, UUIDs) plus numpy scalars and arrays,
    expression trees and function sets.
    """

    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, ExprNode):
            return to_sexpr(o)
        if isinstance(o, FunctionSet):
            return str(o)
        return super(ReportEncoder, self).default(o)


def serialize_object(obj, fields=None, include=None, exclude=None, fixup=None):
    include = include or []
    exclude = exclude or []

    if fields:
        fields = list(fields)
    elif hasattr(obj, 'to_dict'):
        fields = list(obj.to_dict().keys())
    else:
        fields = [f.name for f in dataclasses.fields(obj)]
    fields = [f for f in fields if f not in exclude]
    for i in include:
        if isinstance(i, (tuple, str)):
            fields.append(i)

    # A later duplicate in `fields` overrides an earlier one.

    source = obj.to_dict() if hasattr(obj, 'to_dict') else None
    data = {}
    for f in fields:
        if isinstance(f, tuple):
            k, v = f
            if callable(v):
                data[k] = serialize(v(obj))
            elif isinstance(v, dict):
                data[k] = serialize(getattr(obj, k), **v)
        elif source is not None and f in source:
            data[f] = serialize(source[f])
        else:
            data[f] = serialize(getattr(obj, f))

    if fixup:
        data = fixup(data)

    return data


def serialize(src, fields=None, include=None, exclude=None, fixup=None):
    """
    Serialize a result object to Python primitives suitable for JSON.

    Dataclass instances (reports, configs, individuals, metric reports) become dicts of their fields; objects with a
    ``to_dict()`` method (fitted models) use that method; expression trees become S-expressions; numpy values become
    Python numbers and lists. Containers are serialized recursively, and sets come back as sorted lists.

    If `fields` is specified, it lists the attributes to serialize, replacing the default (all dataclass fields). If
    `include` is specified, it lists attribute descriptions to add to the default list. If `exclude` is specified, it
    lists attribute names to drop from the default list. `fields`, `include` and `exclude` only apply to the top-level
    object.

    Each attribute description can be either:

      * a string - includes the correspondingly named attribute (a field, a property or anything else reachable with
        getattr)

      * a tuple of a key and a one-argument function - the function is called with the object being serialized and
        its result is stored under the key

      * a tuple of an attribute name and a dictionary - the attribute is serialized recursively, with the dictionary
        giving `fields`, `include`, `exclude` and `fixup` options for it

    The `fixup` argument, if given, is a function taking the serialized dict and returning the modified dict.

    Example::

        serialize(result, exclude=['config_echo'], include=[
            ('student', dict(fields=['expr', 'raw_fitness'])),
            ('student_size', lambda r: r.student.size),
        ])
    """

    def subs(subsrc):
        return serialize(subsrc)

    if isinstance(src, ExprNode):
        return to_sexpr(src)

    if isinstance(src, FunctionSet):
        return str(src)

    if dataclasses.is_dataclass(src) and not isinstance(src, type):
        return serialize_object(src, fields=fields, include=include, exclude=exclude, fixup=fixup)

    if hasattr(src, 'to_dict') and callable(src.to_dict):
        return serialize_object(src, fields=fields, include=include, exclude=exclude, fixup=fixup)

    if isinstance(src, (set, frozenset)):
        return sorted(subs(i) for i in src)

    if isinstance(src, (list, tuple)):
        return [subs(i) for i in src]

    if isinstance(src, dict):
        return {str(k): subs(v) for k, v in src.items()}

    if isinstance(src, np.ndarray):
        return [subs(i) for i in src.tolist()]

    if isinstance(src, np.bool_):
        return bool(src)

    if isinstance(src, np.integer):
        return int(src)

    if isinstance(src, np.floating):
        return float(src)

    return src


def flatten(attname):
    """
    Fixup helper for serialize.

    Given an attribute name, returns a fixup function suitable for serialize() that will pull all items from the
    sub-dict and into the main dict. If any of the keys from the sub-dict already exist in the main dict, they'll
    be overwritten.
    """

    def fixup(data):
        for k, v in data[attname].items():
            data[k] = v
        del data[attname]
        return data

    return fixup


def dumps(data):
    """Sorted, indented JSON; equal reports always produce equal bytes."""
    return json.dumps(serialize(data), cls=ReportEncoder, indent=2, sort_keys=True, allow_nan=False) + '\n'
