#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cropemu/nn/network.hpp"

namespace cropemu::nn {

// Little-endian binary primitives shared by the model files. Readers throw
// ParseError on truncation or a bad tag.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}
  void u64(std::uint64_t v);
  void f64(double v);
  void text(const std::string& s);
  void doubles(const std::vector<double>& v);
  void sizes(const std::vector<std::size_t>& v);
  void spec(const NetworkSpec& spec);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}
  std::uint64_t u64();
  double f64();
  std::string text();
  std::vector<double> doubles();
  std::vector<std::size_t> sizes();
  NetworkSpec spec();
  // Reads a 8-byte magic tag and a version, throwing when they differ.
  void expect_header(const char (&magic)[9], std::uint64_t version);
  const std::string& source() const { return source_; }

 private:
  void read(void* data, std::size_t n);
  std::istream& in_;
  std::string source_;
};

void write_header(BinaryWriter& w, const char (&magic)[9], std::uint64_t version);

// A network bound to a shape with its trained parameters and batch-norm
// statistics.
struct TrainedNetwork {
  Network net;
  std::vector<double> params;
  std::vector<double> stats;
};

void write_trained(BinaryWriter& w, const TrainedNetwork& t);
TrainedNetwork read_trained(BinaryReader& r);

}  // namespace cropemu::nn
