#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "coforge/workspace.hpp"

using namespace coforge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("coforge_ws_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

}  // namespace

TEST_CASE("file hashing is content-sensitive") {
  TempDir dir;
  write_file(dir.path / "a.txt", "hello");
  write_file(dir.path / "b.txt", "hello");
  write_file(dir.path / "c.txt", "hello!");
  CHECK(file_fnv64((dir.path / "a.txt").string()) ==
        file_fnv64((dir.path / "b.txt").string()));
  CHECK(file_fnv64((dir.path / "a.txt").string()) !=
        file_fnv64((dir.path / "c.txt").string()));
}

TEST_CASE("record then require resolves the artifact path") {
  TempDir dir;
  Workspace ws = Workspace::open(dir.path.string());
  write_file(dir.path / "lut.json", "{}");
  ws.record("lut", "lut.json");
  CHECK(ws.has("lut"));
  CHECK_FALSE(ws.has("dataset"));
  CHECK(ws.require("lut") == ws.resolve("lut.json"));
}

TEST_CASE("manifest persists across open calls") {
  TempDir dir;
  {
    Workspace ws = Workspace::open(dir.path.string());
    write_file(dir.path / "model.json", "{\"x\":1}");
    ws.record("model", "model.json");
    ws.save();
  }
  Workspace again = Workspace::open(dir.path.string());
  CHECK(again.has("model"));
  CHECK(again.require("model") == again.resolve("model.json"));
}

TEST_CASE("modified artifacts raise a staleness error naming the artifact") {
  TempDir dir;
  Workspace ws = Workspace::open(dir.path.string());
  write_file(dir.path / "dataset.ndjson", "original");
  ws.record("dataset", "dataset.ndjson");
  write_file(dir.path / "dataset.ndjson", "tampered");
  try {
    ws.require("dataset");
    FAIL("expected StalenessError");
  } catch (const StalenessError& e) {
    CHECK(std::string(e.what()).find("dataset") != std::string::npos);
  }
}

TEST_CASE("missing artifacts raise a staleness error") {
  TempDir dir;
  Workspace ws = Workspace::open(dir.path.string());
  write_file(dir.path / "gone.json", "x");
  ws.record("gone", "gone.json");
  fs::remove(dir.path / "gone.json");
  CHECK_THROWS_AS(ws.require("gone"), StalenessError);
  // Unknown names fail too, before touching the filesystem.
  CHECK_THROWS_AS(ws.require("never-recorded"), StalenessError);
}

TEST_CASE("re-recording refreshes the stored hash") {
  TempDir dir;
  Workspace ws = Workspace::open(dir.path.string());
  write_file(dir.path / "zoo.json", "v1");
  ws.record("zoo", "zoo.json");
  write_file(dir.path / "zoo.json", "v2");
  ws.record("zoo", "zoo.json");
  CHECK(ws.require("zoo") == ws.resolve("zoo.json"));
}
