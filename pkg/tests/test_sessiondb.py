import pytest

from supportsel.psychometrics import (RosenbergSession, SilentReadingSession,
                                      UserRecord)
from supportsel.sessiondb import (TABLES, ReferentialError, SessionStore,
                                  SessionValidationError, record_from_dict)

ANSWERS = ("strongly agree",) * 10


def user(uid="u1"):
    return UserRecord(id=uid, name="Ada", surname="L", age=22, gender="f",
                      email="ada@example.org",
                      associated_difficulties=("dyscalculia",),
                      registration_date="2024-01-05")


def reading(uid="u1", env="noisy_class", start="2024-05-01T09:00:00"):
    return SilentReadingSession(
        user_id=uid, environment=env, language="Spanish", start_time=start,
        error_count=2, interaction_times=tuple(float(i + 1) for i in range(9)),
        voice_recognition_errors=0,
    )


def rosenberg(uid="u1", env="infinite_room", start="2024-05-01T10:00:00"):
    return RosenbergSession(user_id=uid, environment=env, start_time=start,
                            elapsed_seconds=120.0, answers=ANSWERS)


def test_store_creates_six_tables(tmp_path):
    store = SessionStore(tmp_path)
    for table in TABLES:
        assert (tmp_path / f"{table}.jsonl").exists()
    assert len(store.environments()) == 4
    assert len(store.languages()) == 4
    assert len(store.emotional_states()) == 4


def test_store_then_list_round_trip(tmp_path):
    store = SessionStore(tmp_path)
    store.store_user(user())
    session = reading()
    store.store_session(session)
    got = store.list_sessions("silent_reading", user_id="u1")
    assert got == [session]


def test_reads_reflect_all_prior_writes(tmp_path):
    store = SessionStore(tmp_path)
    store.store_user(user())
    for i in range(5):
        store.store_session(reading(start=f"2024-05-01T0{i}:00:00"))
        assert len(store.list_sessions("silent_reading")) == i + 1


def test_unknown_user_is_referential_error(tmp_path):
    store = SessionStore(tmp_path)
    with pytest.raises(ReferentialError, match="user"):
        store.store_session(reading(uid="ghost"))


def test_unknown_language_caught_by_validation(tmp_path):
    store = SessionStore(tmp_path)
    store.store_user(user())
    bad = SilentReadingSession(
        user_id="u1", environment="noisy_class", language="Klingon",
        start_time="2024-05-01T09:00:00", error_count=0,
        interaction_times=tuple(1.0 for _ in range(9)),
    )
    with pytest.raises(SessionValidationError, match="language"):
        store.store_session(bad)


def test_unseeded_environment_is_referential_error(tmp_path):
    # a store whose environments table lost its rows (e.g. created by an
    # older tool) must still enforce the foreign key
    store = SessionStore(tmp_path)
    store.store_user(user())
    env_file = tmp_path / "environments.jsonl"
    header = env_file.read_text().splitlines()[0]
    env_file.write_text(header + "\n")
    with pytest.raises(ReferentialError, match="environment"):
        store.store_session(reading())


def test_invalid_session_rejected_before_write(tmp_path):
    store = SessionStore(tmp_path)
    store.store_user(user())
    bad = reading()
    object.__setattr__(bad, "error_count", 99)
    with pytest.raises(SessionValidationError, match="error_count"):
        store.store_session(bad)
    assert store.list_sessions("silent_reading") == []


def test_duplicate_user_rejected(tmp_path):
    store = SessionStore(tmp_path)
    store.store_user(user())
    with pytest.raises(SessionValidationError, match="duplicate"):
        store.store_user(user())


def test_environment_filter_matches_counting_oracle(tmp_path, rng):
    store = SessionStore(tmp_path)
    store.store_user(user())
    environments = [e["id"] for e in store.environments()]
    expected = {env: 0 for env in environments}
    for i in range(100):
        env = environments[int(rng.integers(0, 4))]
        expected[env] += 1  # independent tally while writing the fixture
        store.store_session(reading(env=env, start=f"2024-06-{i % 28 + 1:02d}T08:00:00"))
    for env, count in expected.items():
        assert len(store.list_sessions("silent_reading", environment=env)) == count


def test_time_range_filter(tmp_path):
    store = SessionStore(tmp_path)
    store.store_user(user())
    for day in (1, 5, 9):
        store.store_session(rosenberg(start=f"2024-05-0{day}T10:00:00"))
    got = store.list_sessions("rosenberg", start="2024-05-02T00:00:00",
                              end="2024-05-08T00:00:00")
    assert [s.start_time for s in got] == ["2024-05-05T10:00:00"]


def test_reload_sees_byte_identical_records(tmp_path):
    store = SessionStore(tmp_path)
    store.store_user(user())
    store.store_session(reading())
    store.store_session(rosenberg())
    before = {t: (tmp_path / f"{t}.jsonl").read_bytes() for t in TABLES}

    again = SessionStore(tmp_path)  # fresh process stand-in
    after = {t: (tmp_path / f"{t}.jsonl").read_bytes() for t in TABLES}
    assert before == after
    assert again.list_sessions("silent_reading") == [reading()]
    assert again.list_sessions("rosenberg") == [rosenberg()]


def test_appends_never_rewrite_existing_bytes(tmp_path):
    store = SessionStore(tmp_path)
    store.store_user(user())
    store.store_session(reading())
    prefix = (tmp_path / "silent_reading_results.jsonl").read_bytes()
    store.store_session(reading(start="2024-05-02T09:00:00"))
    grown = (tmp_path / "silent_reading_results.jsonl").read_bytes()
    assert grown.startswith(prefix)
    assert len(grown) > len(prefix)


def test_unknown_kind_rejected(tmp_path):
    store = SessionStore(tmp_path)
    with pytest.raises(ValueError, match="kind"):
        store.list_sessions("eye_tracking")


def test_record_from_dict_variants():
    u = record_from_dict({"kind": "user", "id": "u9", "age": 30, "email": "x@y.z"})
    assert isinstance(u, UserRecord)
    r = record_from_dict({
        "kind": "silent_reading", "user_id": "u9", "environment": "noisy_class",
        "language": "English", "start_time": "t", "error_count": 1,
        "interaction_times": [1.0] * 9,
    })
    assert isinstance(r, SilentReadingSession)
    q = record_from_dict({
        "kind": "rosenberg", "user_id": "u9", "environment": "noisy_class",
        "start_time": "t", "elapsed_seconds": 10.0, "answers": list(ANSWERS),
    })
    assert isinstance(q, RosenbergSession)
    with pytest.raises(ValueError, match="kind"):
        record_from_dict({"kind": "telepathy"})
