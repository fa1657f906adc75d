#include <doctest.h>

#include "helpers.hpp"
#include "pachyderm/session.hpp"

using namespace pachyderm;
using testutil::code_of;
using testutil::TempDir;

namespace {

SlotSpec slot(std::string name, std::optional<Value> def = std::nullopt,
              bool persistent = true) {
    return SlotSpec{std::move(name), std::move(def), persistent};
}

}  // namespace

TEST_SUITE("objects") {

TEST_CASE("create fills defaults, overlays init args, runs the hook once") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("point", {slot("x", Value::integer(0)),
                                    slot("y", Value::integer(0))});
    int hook_calls = 0;
    session->register_init_hook("point",
                                [&](RecordDraft&, const std::map<std::string, Value>&) {
                                    ++hook_calls;
                                });

    Handle origin = session->create_instance("point", {});
    CHECK(equal(origin.read("x"), Value::integer(0)));
    CHECK(equal(origin.read("y"), Value::integer(0)));
    CHECK(hook_calls == 1);

    Handle p = session->create_instance("point", {{"x", Value::integer(5)}});
    CHECK(equal(p.read("x"), Value::integer(5)));
    CHECK(equal(p.read("y"), Value::integer(0)));
    CHECK(hook_calls == 2);

    CHECK(code_of([&] { session->create_instance("ghost", {}); }) == Errc::unknown_class);
    CHECK(code_of([&] {
              session->create_instance("point", {{"zz", Value::unit()}});
          }) == Errc::unknown_slot);
}

TEST_CASE("init hooks see defaults and can adjust the draft") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("photo", {slot("filename", Value::text("")),
                                    slot("thumbnail", Value::text(""))});
    session->register_init_hook(
        "photo", [&](RecordDraft& draft, const std::map<std::string, Value>& init_args) {
            auto name = init_args.find("filename");
            if (name != init_args.end())
                draft.set("thumbnail", Value::text("thumb-" + name->second.as_text()));
        });
    Handle h = session->create_instance("photo", {{"filename", Value::text("1.jpg")}});
    CHECK(equal(h.read("thumbnail"), Value::text("thumb-1.jpg")));
}

TEST_CASE("init hook failure leaks no oid") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {slot("a")});
    session->register_init_hook("c", [](RecordDraft&, const std::map<std::string, Value>&) {
        throw std::runtime_error("nope");
    });
    CHECK(code_of([&] { session->create_instance("c", {}); }) == Errc::hook_failure);
    CHECK(session->object_count() == 0);
    CHECK(session->extent("c").empty());
}

TEST_CASE("loading never reruns initialization") {
    TempDir dir("obj");
    const std::string path = dir.file("s.pdb");
    int hook_calls = 0;
    std::vector<Oid> oids;
    {
        auto session = StoreSession::open(path);
        session->define_class("photo", {slot("filename", Value::text(""))});
        session->register_init_hook("photo",
                                    [&](RecordDraft&, const std::map<std::string, Value>&) {
                                        ++hook_calls;
                                    });
        for (int i = 0; i < 10; ++i)
            oids.push_back(session->create_instance("photo", {}).oid());
        session->commit();
    }
    CHECK(hook_calls == 10);
    for (int round = 0; round < 3; ++round) {
        auto session = StoreSession::open(path);
        session->register_init_hook("photo",
                                    [&](RecordDraft&, const std::map<std::string, Value>&) {
                                        ++hook_calls;
                                    });
        for (Oid oid : oids) session->lookup_instance(oid).read("filename");
    }
    CHECK(hook_calls == 10);
}

TEST_CASE("lookup returns the same handle for the same oid") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {});
    Handle created = session->create_instance("c", {});
    Handle again = session->lookup_instance(created.oid());
    CHECK(same_handle(created, again));
    CHECK(same_handle(session->lookup_instance(created.oid()),
                      session->lookup_instance(created.oid())));
    CHECK_FALSE(same_handle(created, session->create_instance("c", {})));
}

TEST_CASE("lookup errors distinguish deleted from unknown") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {});
    Handle h = session->create_instance("c", {});
    session->commit();
    session->delete_instance(h);
    session->commit();
    CHECK(code_of([&] { session->lookup_instance(h.oid()); }) == Errc::deleted);
    CHECK(code_of([&] { session->lookup_instance(Oid{424242}); }) == Errc::unknown_oid);
}

TEST_CASE("slot read and write mediate through the current version") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {slot("a", Value::integer(1))});
    Handle h = session->create_instance("c", {});
    session->commit();

    h.write("a", Value::integer(2));
    CHECK(equal(h.read("a"), Value::integer(2)));
    CHECK(code_of([&] { h.read("nope"); }) == Errc::unknown_slot);
    CHECK(code_of([&] { h.write("nope", Value::unit()); }) == Errc::unknown_slot);

    // a NotLoaded handle of a stale record reflects post-migration state
    session->commit();
    const uint64_t upgrades_before = session->upgrade_counter().total();
    Handle reloaded = session->lookup_instance(h.oid());
    session->rollback();  // force NotLoaded
    session->redefine_class("c", {slot("a", Value::integer(1)),
                                  slot("b", Value::text("fresh"))});
    CHECK_FALSE(reloaded.is_loaded());
    CHECK(equal(reloaded.read("b"), Value::text("fresh")));
    CHECK(session->upgrade_counter().total() == upgrades_before + 1);
    CHECK(reloaded.loaded_version() == 2);
}

TEST_CASE("unbound slots raise the typed condition until written") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {slot("a")});
    Handle h = session->create_instance("c", {});
    CHECK(code_of([&] { h.read("a"); }) == Errc::unbound_slot);
    h.write("a", Value::integer(3));
    CHECK(equal(h.read("a"), Value::integer(3)));
}

TEST_CASE("opaque values are confined to transient slots") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {slot("data"), slot("cache", std::nullopt, false)});
    Handle h = session->create_instance("c", {});
    CHECK(code_of([&] { h.write("data", Value::opaque("socket")); }) ==
          Errc::non_serializable);
    CHECK_NOTHROW(h.write("cache", Value::opaque("socket")));
    CHECK(h.read("cache").is(Value::Kind::opaque));
    CHECK(code_of([&] {
              session->create_instance("c", {{"data", Value::opaque("fd")}});
          }) == Errc::non_serializable);
}

TEST_CASE("transient slots drop across commit and reopen") {
    TempDir dir("obj");
    const std::string path = dir.file("s.pdb");
    Oid oid;
    {
        auto session = StoreSession::open(path);
        session->define_class("c", {slot("keep", Value::integer(1)),
                                    slot("tmp", std::nullopt, false)});
        Handle h = session->create_instance("c", {});
        h.write("tmp", Value::integer(42));
        CHECK(equal(h.read("tmp"), Value::integer(42)));
        oid = h.oid();
        session->commit();
    }
    auto session = StoreSession::open(path);
    Handle h = session->lookup_instance(oid);
    CHECK(equal(h.read("keep"), Value::integer(1)));
    CHECK(code_of([&] { h.read("tmp"); }) == Errc::unbound_slot);
}

TEST_CASE("reading a ref returns the ref; deref composes lookup") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {slot("next")});
    Handle a = session->create_instance("c", {});
    Handle b = session->create_instance("c", {});
    a.write("next", Value::ref(b.oid()));
    Value v = a.read("next");
    REQUIRE(v.is(Value::Kind::ref));
    CHECK(v.as_ref() == b.oid());
    CHECK(same_handle(session->deref(v), b));
}

TEST_CASE("delete semantics") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {slot("next")});
    SUBCASE("create, delete, commit leaves an empty extent") {
        Handle h = session->create_instance("c", {});
        session->delete_instance(h);
        session->commit();
        CHECK(session->extent("c").empty());
    }
    SUBCASE("double delete reports deleted") {
        Handle h = session->create_instance("c", {});
        session->commit();
        session->delete_instance(h);
        CHECK(code_of([&] { session->delete_instance(h); }) == Errc::deleted);
        CHECK(code_of([&] { h.read("next"); }) == Errc::deleted);
    }
}

TEST_CASE("duplicate hook registration is rejected, last-wins is not a thing") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {slot("a")});
    auto noop_init = [](RecordDraft&, const std::map<std::string, Value>&) {};
    auto noop_mig = [](RecordDraft&, const std::vector<std::string>&,
                       const std::map<std::string, Value>&) {};
    session->register_init_hook("c", noop_init);
    CHECK(code_of([&] { session->register_init_hook("c", noop_init); }) ==
          Errc::duplicate_hook);
    session->register_migration_hook("c", 2, noop_mig);
    CHECK(code_of([&] { session->register_migration_hook("c", 2, noop_mig); }) ==
          Errc::duplicate_hook);
    CHECK_NOTHROW(session->register_migration_hook("c", 3, noop_mig));
    CHECK(code_of([&] { session->register_init_hook("ghost", noop_init); }) ==
          Errc::unknown_class);

    // a migration hook for a version with no pending records never runs
    bool ran = false;
    session->register_migration_hook("c", 4,
                                     [&](RecordDraft&, const std::vector<std::string>&,
                                         const std::map<std::string, Value>&) { ran = true; });
    session->redefine_class("c", {slot("a")});
    session->migrate_eager("c");
    CHECK_FALSE(ran);
}

TEST_CASE("access implies current version") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {slot("a", Value::integer(0))});
    Handle h = session->create_instance("c", {});
    session->commit();
    for (int i = 0; i < 3; ++i)
        session->redefine_class("c", {slot("a", Value::integer(0))});
    h.write("a", Value::integer(9));
    CHECK(h.loaded_version() == session->schema().current_version("c"));
    session->redefine_class("c", {slot("a", Value::integer(0))});
    CHECK(equal(h.read("a"), Value::integer(9)));
    CHECK(h.loaded_version() == session->schema().current_version("c"));
}

TEST_CASE("hooks calling back into the session trip the reentrancy guard") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {slot("a")});
    session->register_init_hook("c", [&](RecordDraft&, const std::map<std::string, Value>&) {
        session->create_instance("c", {});  // forbidden reentrancy
    });
    try {
        session->create_instance("c", {});
        FAIL("expected hook_failure");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::hook_failure);
        CHECK(std::string(e.what()).find("overlapping") != std::string::npos);
    }
}

TEST_CASE("behavioral equivalence against a map-of-maps oracle") {
    TempDir dir("obj");
    auto session = StoreSession::open(dir.file("s.pdb"));
    session->define_class("c", {slot("a", Value::integer(0)), slot("b")});

    struct OracleObject {
        std::map<std::string, Value> slots;
    };
    std::map<uint64_t, OracleObject> oracle;
    std::vector<Oid> oids;

    std::mt19937_64 rng(99);
    for (int op = 0; op < 500; ++op) {
        const int roll = static_cast<int>(rng() % 100);
        if (oids.empty() || roll < 20) {
            Handle h = session->create_instance("c", {});
            oracle[h.oid().id].slots["a"] = Value::integer(0);
            oids.push_back(h.oid());
        } else if (roll < 60) {
            const Oid oid = oids[rng() % oids.size()];
            const std::string name = rng() % 2 ? "a" : "b";
            Value v = Value::integer(testutil::random_int(rng));
            session->lookup_instance(oid).write(name, v);
            oracle[oid.id].slots[name] = v;
        } else {
            const Oid oid = oids[rng() % oids.size()];
            const std::string name = rng() % 2 ? "a" : "b";
            Value got = Value::unit();
            bool got_unbound = false;
            try {
                got = session->lookup_instance(oid).read(name);
            } catch (const Error& e) {
                REQUIRE(e.code() == Errc::unbound_slot);
                got_unbound = true;
            }
            auto& obj = oracle.at(oid.id);
            const bool want_unbound = obj.slots.count(name) == 0;
            CHECK(got_unbound == want_unbound);
            if (!want_unbound && !got_unbound) CHECK(equal(got, obj.slots.at(name)));
        }
    }
}

}  // TEST_SUITE
