#!/usr/bin/env python3
"""Regenerates snmp_vectors.json with pyasn1's BER encoder.

The C++ codec is checked against these frozen bytes; they were produced by
this independent encoder, not by the codec under test. Run only when adding
vectors:  python3 gen_snmp_vectors.py > snmp_vectors.json
"""
import json

from pyasn1.codec.ber import encoder
from pyasn1.type import tag, univ


class Counter32(univ.Integer):
    tagSet = univ.Integer.tagSet.tagImplicitly(tag.Tag(tag.tagClassApplication, tag.tagFormatSimple, 1))


class Gauge32(univ.Integer):
    tagSet = univ.Integer.tagSet.tagImplicitly(tag.Tag(tag.tagClassApplication, tag.tagFormatSimple, 2))


class TimeTicks(univ.Integer):
    tagSet = univ.Integer.tagSet.tagImplicitly(tag.Tag(tag.tagClassApplication, tag.tagFormatSimple, 3))


class IpAddress(univ.OctetString):
    tagSet = univ.OctetString.tagSet.tagImplicitly(tag.Tag(tag.tagClassApplication, tag.tagFormatSimple, 0))


class NoSuchObject(univ.Null):
    tagSet = univ.Null.tagSet.tagImplicitly(tag.Tag(tag.tagClassContext, tag.tagFormatSimple, 0))


class NoSuchInstance(univ.Null):
    tagSet = univ.Null.tagSet.tagImplicitly(tag.Tag(tag.tagClassContext, tag.tagFormatSimple, 1))


PDU_TAG = {"get": 0, "getnext": 1, "response": 2}


def make_value(kind, value):
    if kind == "integer":
        return univ.Integer(value)
    if kind == "octets":
        return univ.OctetString(value.encode("latin-1"))
    if kind == "null":
        return univ.Null("")
    if kind == "oid":
        return univ.ObjectIdentifier(value)
    if kind == "counter32":
        return Counter32(value)
    if kind == "gauge32":
        return Gauge32(value)
    if kind == "timeticks":
        return TimeTicks(value)
    if kind == "nosuchobject":
        return NoSuchObject("")
    if kind == "nosuchinstance":
        return NoSuchInstance("")
    if kind == "ipaddress":
        return IpAddress(bytes(value))
    raise ValueError(kind)


def encode(community, pdu_kind, request_id, error_status, error_index, varbinds):
    items = []
    for oid, kind, value in varbinds:
        pair = univ.Sequence()
        # Positional components on an unschema'd Sequence.
        pair.setComponentByPosition(0, univ.ObjectIdentifier(oid), verifyConstraints=False, matchTags=False)
        pair.setComponentByPosition(1, make_value(kind, value), verifyConstraints=False, matchTags=False)
        items.append(pair)
    vbl = univ.Sequence()
    for i, pair in enumerate(items):
        vbl.setComponentByPosition(i, pair, verifyConstraints=False, matchTags=False)

    pdu = univ.Sequence().subtype(
        implicitTag=tag.Tag(tag.tagClassContext, tag.tagFormatConstructed, PDU_TAG[pdu_kind]))
    pdu.setComponentByPosition(0, univ.Integer(request_id), verifyConstraints=False, matchTags=False)
    pdu.setComponentByPosition(1, univ.Integer(error_status), verifyConstraints=False, matchTags=False)
    pdu.setComponentByPosition(2, univ.Integer(error_index), verifyConstraints=False, matchTags=False)
    pdu.setComponentByPosition(3, vbl, verifyConstraints=False, matchTags=False)

    msg = univ.Sequence()
    msg.setComponentByPosition(0, univ.Integer(1), verifyConstraints=False, matchTags=False)
    msg.setComponentByPosition(1, univ.OctetString(community.encode("latin-1")), verifyConstraints=False,
                               matchTags=False)
    msg.setComponentByPosition(2, pdu, verifyConstraints=False, matchTags=False)
    return encoder.encode(msg).hex()


SYS_UPTIME = "1.3.6.1.2.1.1.3.0"
IF_COLUMNS = [10, 16, 14, 20, 13, 19, 12, 11]


def poll_oids(if_index):
    return [SYS_UPTIME] + ["1.3.6.1.2.1.2.2.1.%d.%d" % (c, if_index) for c in IF_COLUMNS]


CASES = [
    ("get-sysuptime", "public", "get", 1, 0, 0, [(SYS_UPTIME, "null", None)]),
    ("response-sysuptime", "public", "response", 1, 0, 0, [(SYS_UPTIME, "timeticks", 123456)]),
    ("get-interface-poll", "public", "get", 0x7FFFFFFF, 0, 0, [(o, "null", None) for o in poll_oids(1)]),
    ("response-interface-poll", "public", "response", 0x7FFFFFFF, 0, 0,
     [(SYS_UPTIME, "timeticks", 4294967295)]
     + [(o, "counter32", v) for o, v in zip(poll_oids(1)[1:], [0, 127, 128, 255, 256, 65535, 8388608, 4294967295])]),
    ("get-negative-request-id", "private", "get", -1, 0, 0, [(o, "null", None) for o in poll_oids(300)]),
    ("response-error-status", "private", "response", -1, 2, 3, [(o, "null", None) for o in poll_oids(300)]),
    ("response-no-such", "public", "response", 77, 0, 0,
     [(SYS_UPTIME, "timeticks", 0), ("1.3.6.1.2.1.2.2.1.10.9", "nosuchinstance", None),
      ("1.3.6.1.4.1.99999.1", "nosuchobject", None)]),
    ("getnext-large-arcs", "public", "getnext", 1000000, 0, 0,
     [("2.999.3", "null", None), ("1.3.6.1.4.1.4294967295.128.16384.2097152", "null", None),
      ("0.39", "null", None)]),
    ("response-mixed-types", "public", "response", 65536, 0, 0,
     [("1.3.6.1.2.1.1.1.0", "octets", "Synthetic agent " + "x" * 140),
      ("1.3.6.1.2.1.1.2.0", "oid", "1.3.6.1.4.1.8072.3.2.10"),
      ("1.3.6.1.2.1.2.2.1.5.1", "gauge32", 1000000000),
      ("1.3.6.1.2.1.2.2.1.8.1", "integer", -129),
      ("1.3.6.1.2.1.2.2.1.7.1", "integer", 1)]),
    ("response-int32-extremes", "public", "response", -2147483647, 0, 0,
     [("1.3.6.1.2.1.99.1", "integer", -2147483647), ("1.3.6.1.2.1.99.2", "integer", 2147483647),
      ("1.3.6.1.2.1.99.3", "integer", 0), ("1.3.6.1.2.1.99.4", "integer", -1)]),
    ("response-opaque-ipaddress", "public", "response", 5, 0, 0,
     [("1.3.6.1.2.1.4.20.1.1.10.0.0.1", "ipaddress", [10, 0, 0, 1])]),
    ("get-long-community", "c" * 200, "get", 42, 0, 0, [(SYS_UPTIME, "null", None)]),
    ("response-empty-varbinds", "public", "response", 9, 5, 0, []),
]


def describe(value_kind, value):
    if value_kind == "ipaddress":
        return {"type": "opaque", "tag": 0x40, "hex": bytes(value).hex()}
    out = {"type": value_kind}
    if value is not None:
        out["value"] = value
    return out


def main():
    vectors = []
    for name, community, kind, rid, status, index, varbinds in CASES:
        vectors.append({
            "name": name,
            "hex": encode(community, kind, rid, status, index, varbinds),
            "community": community,
            "pdu": kind,
            "request_id": rid,
            "error_status": status,
            "error_index": index,
            "varbinds": [dict(oid=o, **describe(k, v)) for o, k, v in varbinds],
        })
    elements = {
        "integer-5": encoder.encode(univ.Integer(5)).hex(),
        "oid-sysuptime": encoder.encode(univ.ObjectIdentifier(SYS_UPTIME)).hex(),
    }
    print(json.dumps({"generator": "pyasn1 " + __import__("pyasn1").__version__, "elements": elements,
                      "messages": vectors}, indent=1))


if __name__ == "__main__":
    main()
