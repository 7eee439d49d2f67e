#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "ssd/mlp.h"
#include "ssd/tensor.h"

namespace ssd {

// STF: "STF1", rank u8, dims u32 LE, float32 LE payload.
void write_stf(const std::filesystem::path& path, const Tensor& t);
Tensor read_stf(const std::filesystem::path& path);
void write_stf(std::ostream& os, const Tensor& t);
Tensor read_stf(std::istream& is);

/// 8-bit PGM (1 channel) or PPM (3 channels); [-1, 1] -> [0, 255], values
/// clamped, rounded half to even.
void write_pnm(const std::filesystem::path& path, const Tensor& t);
std::uint8_t to_byte(double v);

// Checkpoint: "SSDW", version u32, count u32, then per tensor:
// name length u32, name bytes, rank u8, dims u32 LE, float32 LE data.
constexpr std::uint32_t kCheckpointVersion = 1;
void write_checkpoint(const std::filesystem::path& path, const std::vector<ParamTensor>& tensors);
std::vector<ParamTensor> read_checkpoint(const std::filesystem::path& path);

/// RFC-4180 CSV with a header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  explicit CsvWriter(std::ostream& os, const std::vector<std::string>& header);
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& fields);

 private:
  std::ostream* os_;
  std::unique_ptr<std::ofstream> owned_;
  std::size_t columns_;
};

std::string csv_escape(const std::string& field);
/// Shortest round-trip decimal form.
std::string fmt(double v);

}  // namespace ssd
