#include "advsr/signal.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "advsr/error.h"

namespace advsr::signal {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double s) { return std::isfinite(s); });
}

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
         (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform::Waveform(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (samples_.empty()) throw DomainError("waveform must be non-empty");
  if (sample_rate_ <= 0) throw DomainError("sample rate must be positive");
  if (!all_finite(samples_)) throw NumericError("waveform has non-finite samples");
}

Perturbation::Perturbation(std::vector<double> delta) : delta_(std::move(delta)) {
  if (!all_finite(delta_)) throw NumericError("perturbation has non-finite values");
}

double norm(std::span<const double> v, NormKind kind) {
  if (v.empty()) throw DomainError("norm of empty sequence");
  if (kind == NormKind::kLinf) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  // Scaled accumulation keeps tiny and huge entries from under/overflowing.
  double scale = 0.0, ssq = 1.0;
  for (double x : v) {
    if (x == 0.0) continue;
    const double a = std::abs(x);
    if (scale < a) {
      ssq = 1.0 + ssq * (scale / a) * (scale / a);
      scale = a;
    } else {
      ssq += (a / scale) * (a / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE") {
    throw FormatError(path.string() + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  int sample_rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
    const std::size_t len = read_u32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      throw FormatError(path.string() + ": chunk '" + id + "' overruns file");
    }
    if (id == "fmt ") {
      if (len < 16) throw FormatError(path.string() + ": short fmt chunk");
      const std::uint16_t format = read_u16(&bytes[body]);
      const std::uint16_t channels = read_u16(&bytes[body + 2]);
      sample_rate = static_cast<int>(read_u32(&bytes[body + 4]));
      const std::uint16_t bits = read_u16(&bytes[body + 14]);
      if (format != 1) throw UnsupportedFormatError(path.string() + ": not PCM");
      if (channels != 1) {
        throw UnsupportedFormatError(path.string() + ": " + std::to_string(channels) +
                                     " channels, only mono is supported");
      }
      if (bits != 16) {
        throw UnsupportedFormatError(path.string() + ": " + std::to_string(bits) +
                                     "-bit samples, only 16-bit is supported");
      }
      have_fmt = true;
    } else if (id == "data") {
      data = bytes.data() + body;
      data_len = len;
      have_data = true;
    }
    pos = body + len + (len & 1);
  }

  if (!have_fmt) throw FormatError(path.string() + ": missing fmt chunk");
  if (!have_data) throw FormatError(path.string() + ": missing data chunk");
  if (data_len == 0) throw FormatError(path.string() + ": empty data chunk");
  if (data_len % 2 != 0) throw FormatError(path.string() + ": odd data length");
  if (sample_rate <= 0) throw FormatError(path.string() + ": zero sample rate");

  std::vector<double> samples(data_len / 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto raw = static_cast<std::int16_t>(read_u16(data + 2 * i));
    samples[i] = raw / 32768.0;
  }
  return Waveform(std::move(samples), sample_rate);
}

void save_wav(const Waveform& w, const std::filesystem::path& path) {
  const auto n = static_cast<std::uint32_t>(w.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put_u32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate()) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, 2 * n);
  for (double s : w.samples()) {
    const double q = std::round(32767.0 * std::clamp(s, -1.0, 1.0));
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

double snr_db(std::span<const double> x, std::span<const double> delta) {
  if (x.size() != delta.size()) throw ShapeError("snr_db: length mismatch");
  const double nx = norm(x, NormKind::kL2);
  if (nx == 0.0) throw DomainError("snr_db: zero-energy signal");
  const double nd = norm(delta, NormKind::kL2);
  if (nd == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(nx / nd);
}

double snr_db(const Waveform& x, const Perturbation& delta) {
  return snr_db(x.samples(), delta.values());
}

double eps_from_snr(std::span<const double> x, double snr) {
  const double nx = norm(x, NormKind::kL2);
  if (nx == 0.0) throw DomainError("eps_from_snr: zero-energy signal");
  return nx / std::pow(10.0, snr / 20.0);
}

double eps_from_snr(const Waveform& x, double snr) {
  return eps_from_snr(x.samples(), snr);
}

Waveform apply(const Waveform& x, const Perturbation& delta) {
  if (x.size() != delta.size()) throw ShapeError("apply: length mismatch");
  std::vector<double> out(x.size());
  const auto xs = x.samples();
  const auto ds = delta.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(xs[i] + ds[i], -1.0, 1.0);
  }
  return Waveform(std::move(out), x.sample_rate());
}

}  // namespace advsr::signal
