#include "manifest.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "iblr/errors.hpp"
#include "iblr/io.hpp"

namespace iblr::cli {

const char* const kCodeVersion = IBLR_VERSION;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256: init failed");
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0 && EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount())) != 1) {
      throw Error("sha256: update failed");
    }
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) throw Error("sha256: final failed");
  std::string hex;
  char two[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(two, sizeof two, "%02x", md[i]);
    hex += two;
  }
  return hex;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[80];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

void write_manifest(const ManifestInput& in) {
  JsonWriter w;
  w.begin_object();
  w.key("tool").value("iblr");
  w.key("code_version").value(kCodeVersion);
  w.key("command").value(in.command);
  w.key("started_at").value(in.started_at);
  w.key("finished_at").value(in.finished_at);
  w.key("config").begin_object();
  for (const auto& [k, v] : in.config) w.key(k).value(v);
  w.end_object();
  w.key("files").begin_array();
  for (const std::string& name : in.files) {
    const std::string path = (std::filesystem::path(in.dir) / name).string();
    w.begin_object();
    w.key("name").value(name);
    w.key("bytes").value(static_cast<std::uint64_t>(std::filesystem::file_size(path)));
    w.key("sha256").value(sha256_file(path));
    w.end_object();
  }
  w.end_array();
  w.end_object();
  write_file((std::filesystem::path(in.dir) / "manifest.json").string(), w.str() + "\n");
}

}  // namespace iblr::cli
