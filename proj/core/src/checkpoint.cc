#include "advsr/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

#include "advsr/error.h"

namespace advsr::model {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written in host order; big-endian hosts need byte swaps");

constexpr char kMagic[8] = {'A', 'D', 'V', 'S', 'R', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

std::string_view kind_name(Provenance::Kind k) {
  switch (k) {
    case Provenance::Kind::kScratch: return "scratch";
    case Provenance::Kind::kPretrained: return "pretrained";
    case Provenance::Kind::kFinetuned: return "finetuned";
  }
  return "?";
}

Provenance::Kind parse_kind(const std::string& s) {
  if (s == "scratch") return Provenance::Kind::kScratch;
  if (s == "pretrained") return Provenance::Kind::kPretrained;
  if (s == "finetuned") return Provenance::Kind::kFinetuned;
  throw FormatError("checkpoint: unknown provenance '" + s + "'");
}

template <typename T>
void put(std::string& out, const T& v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

void save_checkpoint(const TrainedModel& m, const std::filesystem::path& path) {
  nlohmann::json header;
  header["id"] = m.id;
  header["arch"] = arch_name(m.arch);
  header["vocab"] = m.vocab.characters();
  header["feat"] = {{"frame_len", m.feat.frame_len},
                    {"hop", m.feat.hop},
                    {"n_bins", m.feat.n_bins},
                    {"floor", m.feat.floor}};
  header["provenance"] = {{"kind", kind_name(m.provenance.kind)},
                          {"seed", m.provenance.seed},
                          {"pretrain_id", m.provenance.pretrain_id}};
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [name, mat] : m.params) {
    table.push_back({{"name", name}, {"rows", mat.rows()}, {"cols", mat.cols()}});
  }
  header["params"] = table;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put(out, kVersion);
  put(out, static_cast<std::uint64_t>(text.size()));
  out += text;
  for (const auto& [name, mat] : m.params) {
    out.append(reinterpret_cast<const char*>(mat.data.data()), mat.data.size() * sizeof(double));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::size_t fixed = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < fixed || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + ": not an advsr checkpoint");
  }
  std::uint32_t version;
  std::uint64_t header_len;
  std::memcpy(&version, bytes.data() + sizeof kMagic, sizeof version);
  std::memcpy(&header_len, bytes.data() + sizeof kMagic + sizeof version, sizeof header_len);
  if (version != kVersion) {
    throw UnsupportedFormatError(path.string() + ": checkpoint version " + std::to_string(version));
  }
  if (bytes.size() < fixed + header_len) throw FormatError(path.string() + ": truncated header");

  TrainedModel m;
  std::size_t pos = fixed + header_len;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(fixed, header_len));
    m.id = header.at("id").get<std::string>();
    m.arch = parse_arch(header.at("arch").get<std::string>());
    m.vocab = Vocabulary(header.at("vocab").get<std::string>());
    const auto& feat = header.at("feat");
    m.feat.frame_len = feat.at("frame_len").get<std::size_t>();
    m.feat.hop = feat.at("hop").get<std::size_t>();
    m.feat.n_bins = feat.at("n_bins").get<std::size_t>();
    m.feat.floor = feat.at("floor").get<double>();
    const auto& prov = header.at("provenance");
    m.provenance.kind = parse_kind(prov.at("kind").get<std::string>());
    m.provenance.seed = prov.at("seed").get<std::uint64_t>();
    m.provenance.pretrain_id = prov.at("pretrain_id").get<std::string>();
    for (const auto& entry : header.at("params")) {
      const auto rows = entry.at("rows").get<std::size_t>();
      const auto cols = entry.at("cols").get<std::size_t>();
      const std::size_t nbytes = rows * cols * sizeof(double);
      if (pos + nbytes > bytes.size()) throw FormatError(path.string() + ": truncated parameters");
      std::vector<double> data(rows * cols);
      std::memcpy(data.data(), bytes.data() + pos, nbytes);
      pos += nbytes;
      m.params.emplace(entry.at("name").get<std::string>(),
                       grad::Matrix(grad::Shape{rows, cols}, std::move(data)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint header: " + e.what());
  }
  if (pos != bytes.size()) throw FormatError(path.string() + ": trailing bytes");
  return m;
}

}  // namespace advsr::model
