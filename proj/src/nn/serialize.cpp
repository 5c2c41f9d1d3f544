#include "cropemu/nn/serialize.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "cropemu/error.hpp"

namespace cropemu::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

constexpr std::uint64_t kMaxLength = std::uint64_t{1} << 34;

}  // namespace

void BinaryWriter::u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }

void BinaryWriter::f64(double v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }

void BinaryWriter::text(const std::string& s) {
  u64(s.size());
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::doubles(const std::vector<double>& v) {
  u64(v.size());
  out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void BinaryWriter::sizes(const std::vector<std::size_t>& v) {
  u64(v.size());
  for (std::size_t x : v) u64(x);
}

void BinaryWriter::spec(const NetworkSpec& spec) {
  u64(spec.layers.size());
  for (const LayerSpec& l : spec.layers) {
    u64(static_cast<std::uint64_t>(l.kind));
    for (std::size_t v : {l.inputSize, l.outputSize, l.channelsIn, l.channelsOut, l.kernelWidth, l.stride,
                          l.padding, l.featureCount, l.factor, l.channels, l.length})
      u64(v);
    f64(l.momentum);
    f64(l.epsilon);
  }
}

void write_header(BinaryWriter& w, const char (&magic)[9], std::uint64_t version) {
  std::uint64_t tag = 0;
  std::memcpy(&tag, magic, 8);
  w.u64(tag);
  w.u64(version);
}

void BinaryReader::read(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw ParseError(source_ + ": truncated binary file");
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v = 0;
  read(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v = 0;
  read(&v, sizeof v);
  return v;
}

std::string BinaryReader::text() {
  const std::uint64_t n = u64();
  if (n > kMaxLength) throw ParseError(source_ + ": implausible string length");
  std::string s(n, '\0');
  read(s.data(), n);
  return s;
}

std::vector<double> BinaryReader::doubles() {
  const std::uint64_t n = u64();
  if (n > kMaxLength) throw ParseError(source_ + ": implausible array length");
  std::vector<double> v(n);
  read(v.data(), n * sizeof(double));
  return v;
}

std::vector<std::size_t> BinaryReader::sizes() {
  const std::uint64_t n = u64();
  if (n > kMaxLength) throw ParseError(source_ + ": implausible array length");
  std::vector<std::size_t> v(n);
  for (auto& x : v) x = u64();
  return v;
}

NetworkSpec BinaryReader::spec() {
  NetworkSpec spec;
  const std::uint64_t n = u64();
  if (n > 4096) throw ParseError(source_ + ": implausible layer count");
  for (std::uint64_t i = 0; i < n; ++i) {
    LayerSpec l;
    const std::uint64_t kind = u64();
    if (kind > static_cast<std::uint64_t>(LayerKind::Reshape)) throw ParseError(source_ + ": unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    for (std::size_t* f : {&l.inputSize, &l.outputSize, &l.channelsIn, &l.channelsOut, &l.kernelWidth, &l.stride,
                           &l.padding, &l.featureCount, &l.factor, &l.channels, &l.length})
      *f = u64();
    l.momentum = f64();
    l.epsilon = f64();
    spec.layers.push_back(l);
  }
  return spec;
}

void BinaryReader::expect_header(const char (&magic)[9], std::uint64_t version) {
  std::uint64_t tag = 0;
  std::memcpy(&tag, magic, 8);
  if (u64() != tag) throw ParseError(source_ + ": not a " + std::string(magic, 8) + " file");
  const std::uint64_t v = u64();
  if (v != version) {
    throw ParseError(source_ + ": unsupported version " + std::to_string(v) + " (expected " +
                     std::to_string(version) + ")");
  }
}

void write_trained(BinaryWriter& w, const TrainedNetwork& t) {
  w.spec(t.net.spec());
  w.sizes(t.net.input_shape());
  w.doubles(t.params);
  w.doubles(t.stats);
}

TrainedNetwork read_trained(BinaryReader& r) {
  TrainedNetwork t;
  NetworkSpec spec = r.spec();
  std::vector<std::size_t> shape = r.sizes();
  t.net = Network(std::move(spec), std::move(shape));
  t.params = r.doubles();
  t.stats = r.doubles();
  if (t.params.size() != t.net.parameter_count() || t.stats.size() != t.net.running_stat_count()) {
    throw ParseError(r.source() + ": parameter block does not match the stored layers");
  }
  return t;
}

}  // namespace cropemu::nn
