#include "hdrtv/nn/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

namespace hdrtv::nn {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; add byte swapping before porting");

namespace {
constexpr char kMagic[8] = {'H', 'T', 'V', 'M', 'D', 'L', '0', '1'};

struct FilePtr {
  std::FILE* f = nullptr;
  ~FilePtr() {
    if (f) std::fclose(f);
  }
};
}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind,
                     const nlohmann::json& config,
                     const std::vector<std::pair<std::string, const Tensor<float>*>>& tensors) {
  nlohmann::json manifest;
  manifest["kind"] = kind;
  manifest["config"] = config;
  auto& list = manifest["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : tensors) list.push_back({{"name", name}, {"shape", t->shape}});
  const std::string m = manifest.dump();

  FilePtr fp{std::fopen(path.c_str(), "wb")};
  if (!fp.f) fail(Errc::io, "cannot open for writing: " + path);
  const std::uint64_t mlen = m.size();
  bool ok = std::fwrite(kMagic, 1, 8, fp.f) == 8 && std::fwrite(&mlen, 8, 1, fp.f) == 1 &&
            std::fwrite(m.data(), 1, m.size(), fp.f) == m.size();
  for (const auto& [name, t] : tensors)
    ok = ok && std::fwrite(t->v.data(), sizeof(float), t->v.size(), fp.f) == t->v.size();
  if (!ok || std::fflush(fp.f) != 0) fail(Errc::io, "short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  FilePtr fp{std::fopen(path.c_str(), "rb")};
  if (!fp.f) fail(Errc::io, "cannot open model file: " + path);
  char magic[8];
  if (std::fread(magic, 1, 8, fp.f) != 8 || std::memcmp(magic, kMagic, 8) != 0)
    fail(Errc::io, "not a model file (bad magic): " + path);
  std::uint64_t mlen = 0;
  if (std::fread(&mlen, 8, 1, fp.f) != 1 || mlen == 0 || mlen > (1u << 20))
    fail(Errc::io, "corrupt model manifest length: " + path);
  std::string m(mlen, '\0');
  if (std::fread(m.data(), 1, mlen, fp.f) != mlen)
    fail(Errc::io, "truncated model manifest: " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(m);
  } catch (const std::exception& e) {
    fail(Errc::io, std::string("bad model manifest json: ") + e.what());
  }
  Checkpoint ck;
  try {
    ck.kind = manifest.at("kind").get<std::string>();
    ck.config = manifest.at("config");
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<int>>();
      Tensor<float> t{shape};
      if (std::fread(t.v.data(), sizeof(float), t.v.size(), fp.f) != t.v.size())
        fail(Errc::io, "truncated tensor payload '" + name + "': " + path);
      ck.tensors.emplace(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io, std::string("bad model manifest: ") + e.what());
  }
  return ck;
}

}  // namespace hdrtv::nn
