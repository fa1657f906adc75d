#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "pachyderm/graph.hpp"
#include "pachyderm/session.hpp"

using namespace pachyderm;
using testutil::TempDir;

#ifndef PACHYDERM_CLI_PATH
#define PACHYDERM_CLI_PATH "pachyderm"
#endif

namespace {

SlotSpec slot(std::string name, std::optional<Value> def = std::nullopt,
              bool persistent = true) {
    return SlotSpec{std::move(name), std::move(def), persistent};
}

struct CmdResult {
    int exit_code;
    std::string out;
};

CmdResult run_cli(const std::string& args) {
    const std::string cmd = std::string(PACHYDERM_CLI_PATH) + " " + args;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("every verb is a thin wrapper: CLI and library scripts converge") {
    TempDir dir("cli");

    // shared fixture: a small exported graph
    const std::string blob_path = dir.file("graph.blob");
    {
        auto src = StoreSession::open(dir.file("src.pdb"));
        src->define_class("photo", {slot("filename", Value::text(""))});
        Handle a = src->create_instance("photo", {{"filename", Value::text("1.jpg")}});
        Handle b = src->create_instance("photo", {{"filename", Value::text("2.jpg")}});
        ExportedGraph exported = export_subgraph(*src, {a.oid(), b.oid()});
        std::ofstream out(blob_path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(exported.bytes.data()),
                  static_cast<std::streamsize>(exported.bytes.size()));
    }
    const std::string v1 = "class photo\n  slot filename default \"\"\nend\n";
    const std::string v2 =
        "class photo\n  slot filename default \"\"\n  slot thumbnail default \"\"\nend\n";
    write_file(dir.file("v1.schema"), v1);
    write_file(dir.file("v2.schema"), v2);

    // CLI route
    const std::string cli_store = dir.file("via-cli.pdb");
    CHECK(run_cli("init " + cli_store).exit_code == 0);
    CHECK(run_cli("set-schema " + cli_store + " " + dir.file("v1.schema")).exit_code == 0);
    CHECK(run_cli("import " + cli_store + " " + blob_path).exit_code == 0);
    CHECK(run_cli("set-schema " + cli_store + " " + dir.file("v2.schema")).exit_code == 0);
    CHECK(run_cli("migrate " + cli_store + " photo --eager").exit_code == 0);
    CHECK(run_cli("compact " + cli_store).exit_code == 0);

    // library route, committing at the same points
    const std::string lib_store = dir.file("via-lib.pdb");
    {
        auto session = StoreSession::open(lib_store);
        for (const auto& [name, slots] : parse_schema_text(v1)) session->define_class(name, slots);
        session->commit();
        std::ifstream in(blob_path, std::ios::binary);
        std::vector<uint8_t> blob((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
        import_subgraph(*session, blob);
        session->commit();
        for (const auto& [name, slots] : parse_schema_text(v2))
            session->redefine_class(name, slots);
        session->commit();
        session->migrate_eager("photo");
        session->commit();
        session->compact();
    }

    CHECK(read_file(cli_store) == read_file(lib_store));
}

TEST_CASE("set-schema warns on stderr when slots are discarded") {
    TempDir dir("cli");
    const std::string store = dir.file("s.pdb");
    write_file(dir.file("v1.schema"), "class c\n  slot a\n  slot b\nend\n");
    write_file(dir.file("v2.schema"), "class c\n  slot b\nend\n");
    CHECK(run_cli("init " + store).exit_code == 0);
    CHECK(run_cli("set-schema " + store + " " + dir.file("v1.schema")).exit_code == 0);

    const std::string err_path = dir.file("stderr.txt");
    CmdResult result =
        run_cli("set-schema " + store + " " + dir.file("v2.schema") + " 2>" + err_path);
    CHECK(result.exit_code == 0);
    CHECK(result.out == "redefined c v2 added=[] discarded=[a]\n");
    const std::string err = read_file(err_path);
    CHECK(err.find("warning:") != std::string::npos);
    CHECK(err.find("discards") != std::string::npos);
}

TEST_CASE("show, extent and classes print stable line-oriented output") {
    TempDir dir("cli");
    const std::string store = dir.file("s.pdb");
    Oid oid;
    {
        auto session = StoreSession::open(store);
        session->define_class("point", {slot("x", Value::integer(0)),
                                        slot("y", Value::integer(0)),
                                        slot("scratch", std::nullopt, false)});
        oid = session
                  ->create_instance("point", {{"x", Value::integer(4)},
                                              {"y", Value::integer(-2)}})
                  .oid();
        session->create_instance("point", {});
        session->commit();
    }
    CmdResult show = run_cli("show " + store + " " + std::to_string(oid.id));
    CHECK(show.exit_code == 0);
    CHECK(show.out == "oid: " + std::to_string(oid.id) +
                          "\nclass: point v1\nx = 4\ny = -2\n");

    CmdResult extent = run_cli("extent " + store + " point");
    CHECK(extent.exit_code == 0);
    CHECK(extent.out == std::to_string(oid.id) + "\n" + std::to_string(oid.id + 1) + "\n");

    CmdResult classes = run_cli("classes " + store);
    CHECK(classes.exit_code == 0);
    CHECK(classes.out == "point v1 slots=[x,y,scratch(transient)]\n");

    CmdResult verify = run_cli("verify " + store);
    CHECK(verify.exit_code == 0);
    CHECK(verify.out == "ok\n");
}

TEST_CASE("domain errors exit 1 without a stack trace") {
    TempDir dir("cli");
    const std::string store = dir.file("s.pdb");
    run_cli("init " + store);
    CmdResult bad_class = run_cli("migrate " + store + " ghost --eager 2>/dev/null");
    CHECK(bad_class.exit_code == 1);
    CmdResult bad_oid = run_cli("show " + store + " 42 2>/dev/null");
    CHECK(bad_oid.exit_code == 1);
    CmdResult bad_store = run_cli("info " + dir.file("missing.pdb") + "/nope 2>/dev/null");
    CHECK(bad_store.exit_code == 1);
}

TEST_CASE("export prints the mapping and import rebuilds it") {
    TempDir dir("cli");
    const std::string store = dir.file("s.pdb");
    Oid a, b;
    {
        auto session = StoreSession::open(store);
        session->define_class("node", {slot("next")});
        Handle ha = session->create_instance("node", {});
        Handle hb = session->create_instance("node", {});
        ha.write("next", Value::ref(hb.oid()));
        a = ha.oid();
        b = hb.oid();
        session->commit();
    }
    const std::string blob = dir.file("g.blob");
    CmdResult exported = run_cli("export " + store + " " + blob + " " + std::to_string(a.id));
    CHECK(exported.exit_code == 0);
    CHECK(exported.out == "exported: 2\n" + std::to_string(a.id) + " -> 1\n" +
                              std::to_string(b.id) + " -> 2\n");

    const std::string other = dir.file("other.pdb");
    run_cli("init " + other);
    CmdResult imported = run_cli("import " + other + " " + blob);
    CHECK(imported.exit_code == 0);
    CHECK(imported.out == "imported: 2\n1 -> 1\n2 -> 2\n");
}

}  // TEST_SUITE
