// Builds sqlite fixtures from SQL scripts.
//   build_fixture_dbs <spider_mini dir> <out dir>
// writes <out>/database/<db>/<db>.sqlite and <out>/replicas/<db>/<name>.sqlite
#include <sqlite3.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

static bool build(const fs::path& script, const fs::path& target) {
    std::ifstream in(script);
    std::stringstream ss;
    ss << in.rdbuf();
    fs::create_directories(target.parent_path());
    fs::remove(target);
    sqlite3* db = nullptr;
    if (sqlite3_open(target.c_str(), &db) != SQLITE_OK) {
        std::cerr << "cannot open " << target << "\n";
        return false;
    }
    char* err = nullptr;
    const std::string sql = "BEGIN;\n" + ss.str() + "\nCOMMIT;";
    const int rc = sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err);
    if (rc != SQLITE_OK) {
        std::cerr << script << ": " << (err ? err : "?") << "\n";
        sqlite3_free(err);
    }
    sqlite3_close(db);
    return rc == SQLITE_OK;
}

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: build_fixture_dbs <src> <out>\n";
        return 2;
    }
    const fs::path src = argv[1], out = argv[2];
    bool ok = true;
    for (const auto& e : fs::directory_iterator(src / "sql")) {
        if (e.path().extension() != ".sql") continue;
        const std::string db = e.path().stem().string();
        ok &= build(e.path(), out / "database" / db / (db + ".sqlite"));
    }
    if (fs::is_directory(src / "replicas"))
        for (const auto& d : fs::directory_iterator(src / "replicas"))
            for (const auto& e : fs::directory_iterator(d.path()))
                if (e.path().extension() == ".sql")
                    ok &= build(e.path(), out / "replicas" / d.path().filename() / (e.path().stem().string() + ".sqlite"));
    return ok ? 0 : 1;
}
