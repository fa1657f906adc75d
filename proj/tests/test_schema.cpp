#include <doctest.h>

#include "helpers.hpp"
#include "pachyderm/schema.hpp"

using namespace pachyderm;
using testutil::code_of;

namespace {

SlotSpec slot(std::string name, std::optional<Value> def = std::nullopt,
              bool persistent = true) {
    return SlotSpec{std::move(name), std::move(def), persistent};
}

}  // namespace

TEST_SUITE("schema") {

TEST_CASE("define and redefine") {
    SchemaRegistry reg;
    const auto& point = reg.define("point", {slot("x", Value::integer(0)),
                                             slot("y", Value::integer(0))});
    CHECK(point.version == 1);
    CHECK(reg.current_version("point") == 1);

    CHECK(code_of([&] { reg.define("point", {}); }) == Errc::already_defined);
    CHECK(code_of([&] {
              reg.define("bad", {slot("a"), slot("a")});
          }) == Errc::invalid_slot_spec);

    auto [v2, diff] = reg.redefine("point", {slot("x"), slot("y"), slot("z")});
    CHECK(v2->version == 2);
    CHECK(diff.added == std::set<std::string>{"z"});
    CHECK(diff.discarded.empty());
    CHECK(diff.retained == std::set<std::string>{"x", "y"});

    CHECK(code_of([&] { reg.redefine("nope", {}); }) == Errc::unknown_class);
}

TEST_CASE("redefinition with identical slots still bumps the version") {
    SchemaRegistry reg;
    reg.define("photo", {slot("filename")});
    auto [v2, diff] = reg.redefine("photo", {slot("filename")});
    CHECK(v2->version == 2);
    CHECK(diff.added.empty());
    CHECK(diff.discarded.empty());
    CHECK(diff.retained == std::set<std::string>{"filename"});
}

TEST_CASE("diff of a,b -> b,c") {
    ClassDescriptor old_desc{"k", 1, {slot("a"), slot("b")}};
    ClassDescriptor new_desc{"k", 2, {slot("b"), slot("c")}};
    ClassDiff diff = class_diff(old_desc, new_desc);
    CHECK(diff.added == std::set<std::string>{"c"});
    CHECK(diff.discarded == std::set<std::string>{"a"});
    CHECK(diff.retained == std::set<std::string>{"b"});

    ClassDescriptor other{"m", 1, {}};
    CHECK(code_of([&] { class_diff(old_desc, other); }) == Errc::name_mismatch);
}

TEST_CASE("persistent/default changes keep a slot retained") {
    ClassDescriptor old_desc{"k", 1, {slot("a", Value::integer(0), true)}};
    ClassDescriptor new_desc{"k", 2, {slot("a", std::nullopt, false)}};
    ClassDiff diff = class_diff(old_desc, new_desc);
    CHECK(diff.retained == std::set<std::string>{"a"});
    CHECK(diff.added.empty());
    CHECK(diff.discarded.empty());
}

TEST_CASE("diff partition invariants over random slot sets") {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 200; ++round) {
        auto pick = [&] {
            std::vector<SlotSpec> slots;
            for (int i = 0; i < 8; ++i)
                if (rng() % 2) slots.push_back(slot("s" + std::to_string(i)));
            return slots;
        };
        ClassDescriptor a{"c", 1, pick()};
        ClassDescriptor b{"c", 2, pick()};
        ClassDiff diff = class_diff(a, b);

        for (const auto& name : diff.added) {
            CHECK_FALSE(diff.discarded.count(name));
            CHECK_FALSE(diff.retained.count(name));
        }
        for (const auto& name : diff.discarded) CHECK_FALSE(diff.retained.count(name));

        std::set<std::string> new_names, old_names;
        for (const auto& s : b.slots) new_names.insert(s.name);
        for (const auto& s : a.slots) old_names.insert(s.name);
        std::set<std::string> added_retained = diff.added;
        added_retained.insert(diff.retained.begin(), diff.retained.end());
        CHECK(added_retained == new_names);
        std::set<std::string> discarded_retained = diff.discarded;
        discarded_retained.insert(diff.retained.begin(), diff.retained.end());
        CHECK(discarded_retained == old_names);
    }
}

TEST_CASE("version range is contiguous and descriptors immutable") {
    SchemaRegistry reg;
    reg.define("c", {slot("a")});
    for (int i = 0; i < 5; ++i) reg.redefine("c", {slot("a"), slot("b" + std::to_string(i))});
    CHECK(reg.current_version("c") == 6);
    for (uint64_t v = 1; v <= 6; ++v) CHECK(reg.get("c", v).version == v);
    CHECK(code_of([&] { reg.get("c", 7); }) == Errc::unknown_version);
    CHECK(code_of([&] { reg.get("c", 0); }) == Errc::unknown_version);

    const auto enc_before = encode_descriptor(reg.get("c", 3));
    reg.redefine("c", {slot("zzz")});
    CHECK(encode_descriptor(reg.get("c", 3)) == enc_before);
}

TEST_CASE("constant defaults reject opaque and ref") {
    SchemaRegistry reg;
    CHECK(code_of([&] {
              reg.define("c", {slot("a", Value::opaque("x"))});
          }) == Errc::invalid_slot_spec);
    CHECK(code_of([&] {
              reg.define("c", {slot("a", Value::ref(Oid{1}))});
          }) == Errc::invalid_slot_spec);
    CHECK(code_of([&] {
              reg.define("c", {slot("a", Value::list({Value::ref(Oid{1})}))});
          }) == Errc::invalid_slot_spec);
}

TEST_CASE("descriptor encoding round-trips") {
    ClassDescriptor d{"photo", 3,
                      {slot("filename", Value::text("")),
                       slot("thumbnail"),
                       slot("cache", Value::integer(7), false)}};
    auto enc = encode_descriptor(d);
    size_t consumed = 0;
    ClassDescriptor back = decode_descriptor(enc, 0, consumed);
    CHECK(consumed == enc.size());
    CHECK(back.name == d.name);
    CHECK(back.version == d.version);
    REQUIRE(back.slots.size() == 3);
    CHECK(back.slots[0].name == "filename");
    CHECK(equal(*back.slots[0].default_value, Value::text("")));
    CHECK_FALSE(back.slots[1].default_value.has_value());
    CHECK(back.slots[2].persistent == false);
    CHECK(encode_descriptor(back) == enc);
}

TEST_CASE("schema text grammar") {
    const auto defs = parse_schema_text(
        "class point\n"
        "  slot x default 0\n"
        "  slot y default 0\n"
        "end\n");
    REQUIRE(defs.size() == 1);
    CHECK(defs[0].first == "point");
    REQUIRE(defs[0].second.size() == 2);
    CHECK(equal(*defs[0].second[0].default_value, Value::integer(0)));
    CHECK(defs[0].second[0].persistent);

    const auto unbound = parse_schema_text("class p\n  slot s\nend\n");
    CHECK_FALSE(unbound[0].second[0].default_value.has_value());

    CHECK(code_of([] { parse_schema_text("class p\n  slot s default\nend\n"); }) ==
          Errc::parse_error);
}

TEST_CASE("schema text literals and flags") {
    const auto defs = parse_schema_text(
        "# catalog classes\n"
        "class photo\n"
        "  slot filename default \"a \\\"b\\\\\"\n"
        "  slot ratio default 0.5\n"
        "  slot neg default -3\n"
        "  slot kind default :jpeg\n"
        "  slot shown default false\n"
        "  slot nothing default unit\n"
        "  slot cache transient\n"
        "  slot hits default 0 transient\n"
        "end\n"
        "\n"
        "class tag\n"
        "  slot name\n"
        "end\n");
    REQUIRE(defs.size() == 2);
    const auto& slots = defs[0].second;
    CHECK(equal(*slots[0].default_value, Value::text("a \"b\\")));
    CHECK(equal(*slots[1].default_value, Value::real(0.5)));
    CHECK(equal(*slots[2].default_value, Value::integer(-3)));
    CHECK(equal(*slots[3].default_value, Value::symbol("jpeg")));
    CHECK(equal(*slots[4].default_value, Value::boolean(false)));
    CHECK(equal(*slots[5].default_value, Value::unit()));
    CHECK_FALSE(slots[6].persistent);
    CHECK_FALSE(slots[7].persistent);
    CHECK(equal(*slots[7].default_value, Value::integer(0)));
}

TEST_CASE("schema text parse errors carry line numbers") {
    try {
        parse_schema_text("class a\nend\nslot x\n");
        FAIL("expected parse_error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::parse_error);
        CHECK(e.offset() == 3);
    }
    CHECK(code_of([] { parse_schema_text("class a\nclass b\nend\n"); }) == Errc::parse_error);
    CHECK(code_of([] { parse_schema_text("class a\n"); }) == Errc::parse_error);
    CHECK(code_of([] { parse_schema_text("class a\n  slot s default \"x\n end\n"); }) ==
          Errc::parse_error);
    CHECK(code_of([] { parse_schema_text("class a\n  slot s default 1.2.3\nend\n"); }) ==
          Errc::parse_error);
    CHECK(code_of([] { parse_schema_text("bogus\n"); }) == Errc::parse_error);
}

}  // TEST_SUITE
