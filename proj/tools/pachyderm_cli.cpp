// pachyderm: operator tool for inspecting, evolving, migrating, exporting
// and verifying stores. Every verb is a thin wrapper over the library API;
// migrations run hook-free (defaults only).
//
// Exit codes: 0 success, 1 domain errors, 2 corruption findings from verify.

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pachyderm/graph.hpp"
#include "pachyderm/session.hpp"

namespace {

using namespace pachyderm;

std::unique_ptr<StoreSession> open_store(const std::string& path, bool force_unlock) {
    OpenOptions opts;
    opts.force_unlock = force_unlock;
    return StoreSession::open(path, opts);
}

std::string join_names(const std::set<std::string>& names) {
    std::string out = "[";
    bool first = true;
    for (const auto& n : names) {
        if (!first) out += ",";
        first = false;
        out += n;
    }
    return out + "]";
}

int cmd_init(const std::string& path, bool force) {
    auto session = open_store(path, force);
    std::cout << "initialized " << path << "\n";
    return 0;
}

int cmd_info(const std::string& path, bool force) {
    auto session = open_store(path, force);
    std::cout << "classes: " << session->class_count() << "\n";
    std::cout << "objects: " << session->object_count() << "\n";
    std::cout << "commits: " << session->sequence_number() << "\n";
    return 0;
}

int cmd_classes(const std::string& path, bool force) {
    auto session = open_store(path, force);
    for (const auto& name : session->schema().class_names()) {
        const ClassDescriptor& desc = session->current_descriptor(name);
        std::cout << name << " v" << desc.version << " slots=[";
        bool first = true;
        for (const auto& slot : desc.slots) {
            if (!first) std::cout << ",";
            first = false;
            std::cout << slot.name;
            if (!slot.persistent) std::cout << "(transient)";
        }
        std::cout << "]\n";
    }
    return 0;
}

int cmd_extent(const std::string& path, const std::string& class_name, bool force) {
    auto session = open_store(path, force);
    for (Oid oid : session->extent(class_name)) std::cout << oid.id << "\n";
    return 0;
}

int cmd_show(const std::string& path, uint64_t oid, bool force) {
    auto session = open_store(path, force);
    const InstanceRecord& rec = session->peek_record(Oid{oid});
    std::cout << "oid: " << rec.oid.id << "\n";
    std::cout << "class: " << rec.class_name << " v" << rec.class_version << "\n";
    for (const auto& [slot, value] : rec.slots)
        std::cout << slot << " = " << to_display_string(value) << "\n";
    return 0;
}

int cmd_set_schema(const std::string& path, const std::string& schema_file, bool force) {
    std::ifstream in(schema_file);
    if (!in) {
        std::cerr << "error: cannot read " << schema_file << "\n";
        return 1;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const auto defs = parse_schema_text(buffer.str());

    auto session = open_store(path, force);
    for (const auto& [name, slots] : defs) {
        if (session->schema().has_class(name)) {
            RedefineResult result = session->redefine_class(name, slots);
            std::cout << "redefined " << name << " v" << result.descriptor->version
                      << " added=" << join_names(result.diff.added)
                      << " discarded=" << join_names(result.diff.discarded) << "\n";
            if (!result.diff.discarded.empty())
                std::cerr << "warning: redefinition of " << name << " discards slots "
                          << join_names(result.diff.discarded)
                          << "; their values are dropped unless a migration hook is"
                             " registered through the library API\n";
        } else {
            session->define_class(name, slots);
            std::cout << "defined " << name << " v1\n";
        }
    }
    session->commit();
    return 0;
}

int cmd_migrate(const std::string& path, const std::string& class_name, bool eager,
                bool force) {
    if (!eager) {
        std::cerr << "error: only --eager migration is available from the CLI\n";
        return 1;
    }
    auto session = open_store(path, force);
    const size_t upgraded = session->migrate_eager(class_name);
    session->commit();
    std::cout << "upgraded: " << upgraded << "\n";
    return 0;
}

int cmd_export(const std::string& path, const std::string& out_file,
               const std::vector<uint64_t>& oids, bool force) {
    auto session = open_store(path, force);
    std::vector<Oid> roots;
    roots.reserve(oids.size());
    for (uint64_t id : oids) roots.push_back(Oid{id});
    ExportedGraph graph = export_subgraph(*session, roots);

    std::ofstream out(out_file, std::ios::binary | std::ios::trunc);
    if (!out) {
        std::cerr << "error: cannot write " << out_file << "\n";
        return 1;
    }
    out.write(reinterpret_cast<const char*>(graph.bytes.data()),
              static_cast<std::streamsize>(graph.bytes.size()));
    out.close();

    std::cout << "exported: " << graph.dense_ids.size() << "\n";
    for (const auto& [oid, dense] : graph.dense_ids)
        std::cout << oid.id << " -> " << dense << "\n";
    return 0;
}

int cmd_import(const std::string& path, const std::string& in_file, bool force) {
    std::ifstream in(in_file, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read " << in_file << "\n";
        return 1;
    }
    std::vector<uint8_t> blob((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());

    auto session = open_store(path, force);
    const auto mapping = import_subgraph(*session, blob);
    session->commit();

    std::cout << "imported: " << mapping.size() << "\n";
    for (const auto& [dense, oid] : mapping) std::cout << dense << " -> " << oid.id << "\n";
    return 0;
}

int cmd_compact(const std::string& path, bool force) {
    auto session = open_store(path, force);
    const auto [old_size, new_size] = session->compact();
    std::cout << "compacted: " << old_size << " -> " << new_size << " bytes\n";
    return 0;
}

int cmd_verify(const std::string& path, bool force) {
    auto session = open_store(path, force);
    VerifyReport report = session->verify();
    if (report.clean()) {
        std::cout << "ok\n";
        return 0;
    }
    for (const auto& finding : report.findings) std::cout << finding.to_line() << "\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pachyderm - persistent object store tool"};
    app.require_subcommand(1);
    bool force = false;
    app.add_flag("--force-unlock", force, "break an existing store lock");

    std::string path, class_name, file;
    uint64_t oid = 0;
    std::vector<uint64_t> oids;
    bool eager = false;

    auto* init = app.add_subcommand("init", "create an empty store");
    init->add_option("path", path)->required();

    auto* info = app.add_subcommand("info", "summarize a store");
    info->add_option("path", path)->required();

    auto* classes = app.add_subcommand("classes", "list class descriptors");
    classes->add_option("path", path)->required();

    auto* extent = app.add_subcommand("extent", "list live oids of a class");
    extent->add_option("path", path)->required();
    extent->add_option("class", class_name)->required();

    auto* show = app.add_subcommand("show", "print one object record");
    show->add_option("path", path)->required();
    show->add_option("oid", oid)->required();

    auto* set_schema = app.add_subcommand("set-schema", "define or redefine classes");
    set_schema->add_option("path", path)->required();
    set_schema->add_option("schemafile", file)->required();

    auto* migrate = app.add_subcommand("migrate", "upgrade a class extent");
    migrate->add_option("path", path)->required();
    migrate->add_option("class", class_name)->required();
    migrate->add_flag("--eager", eager, "sweep the whole extent now");

    auto* exp = app.add_subcommand("export", "export a subgraph to a file");
    exp->add_option("path", path)->required();
    exp->add_option("out", file)->required();
    exp->add_option("oid", oids)->required();

    auto* imp = app.add_subcommand("import", "import a subgraph from a file");
    imp->add_option("path", path)->required();
    imp->add_option("in", file)->required();

    auto* compact = app.add_subcommand("compact", "rewrite keeping live state only");
    compact->add_option("path", path)->required();

    auto* verify = app.add_subcommand("verify", "audit checksums and invariants");
    verify->add_option("path", path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        if (init->parsed()) return cmd_init(path, force);
        if (info->parsed()) return cmd_info(path, force);
        if (classes->parsed()) return cmd_classes(path, force);
        if (extent->parsed()) return cmd_extent(path, class_name, force);
        if (show->parsed()) return cmd_show(path, oid, force);
        if (set_schema->parsed()) return cmd_set_schema(path, file, force);
        if (migrate->parsed()) return cmd_migrate(path, class_name, eager, force);
        if (exp->parsed()) return cmd_export(path, file, oids, force);
        if (imp->parsed()) return cmd_import(path, file, force);
        if (compact->parsed()) return cmd_compact(path, force);
        if (verify->parsed()) return cmd_verify(path, force);
    } catch (const pachyderm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
