from numpy.testing import assert_array_equal

from proxlead.core.streams import Purpose, StreamFactory, derive_seed, make_stream


def test_same_triple_gives_same_stream():
    a = make_stream(5, 2, Purpose.COMPRESSOR).random(10)
    b = make_stream(5, 2, Purpose.COMPRESSOR).random(10)
    assert_array_equal(a, b)


def test_purposes_and_replicas_are_independent():
    base = make_stream(5, 0, Purpose.ORACLE).random(4)
    assert not (base == make_stream(5, 0, Purpose.COMPRESSOR).random(4)).all()
    assert not (base == make_stream(5, 1, Purpose.ORACLE).random(4)).all()


def test_factory_streams_keep_advancing():
    streams = StreamFactory(3)
    first = streams.oracle.random()
    second = streams.oracle.random()
    assert first != second
    fresh = StreamFactory(3)
    assert fresh.oracle.random() == first


def test_derived_seeds_are_deterministic_and_distinct():
    seeds = [derive_seed(7, i) for i in range(5)]
    assert seeds == [derive_seed(7, i) for i in range(5)]
    assert len(set(seeds)) == 5
