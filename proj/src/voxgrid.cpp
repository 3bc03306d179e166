#include "voxdiff/voxgrid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace voxdiff {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::DimOverflow: return "DimOverflow";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InvalidGrid: return "InvalidGrid";
    case Errc::EmptySlice: return "EmptySlice";
    case Errc::SizeOutOfRange: return "SizeOutOfRange";
    case Errc::BadRange: return "BadRange";
    case Errc::StepOutOfRange: return "StepOutOfRange";
    case Errc::MissingTarget: return "MissingTarget";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::NonFiniteOutput: return "NonFiniteOutput";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::EmptySurface: return "EmptySurface";
    case Errc::OpenMesh: return "OpenMesh";
    case Errc::EmptyForeground: return "EmptyForeground";
    case Errc::DegenerateMask: return "DegenerateMask";
    case Errc::ExtentExceedsGrid: return "ExtentExceedsGrid";
    case Errc::ZeroGroundTruth: return "ZeroGroundTruth";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::MissingGroundTruth: return "MissingGroundTruth";
    case Errc::SingleClass: return "SingleClass";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::BadManifest: return "BadManifest";
    case Errc::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// VoxelGrid / Image2D

VoxelGrid::VoxelGrid(Dims3 dims, double fill) : dims_(dims) {
  if (dims.depth < 1 || dims.height < 1 || dims.width < 1) {
    throw Error(Errc::InvalidGrid, "grid dims must be positive");
  }
  values_.assign(dims.count(), fill);
}

VoxelGrid::VoxelGrid(Dims3 dims, std::vector<double> values) : dims_(dims), values_(std::move(values)) {
  if (dims.depth < 1 || dims.height < 1 || dims.width < 1) {
    throw Error(Errc::InvalidGrid, "grid dims must be positive");
  }
  if (values_.size() != dims.count()) {
    throw Error(Errc::InvalidGrid, "value count does not match dims");
  }
}

bool VoxelGrid::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool VoxelGrid::is_binary() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::size_t VoxelGrid::foreground_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](double v) { return v > 0.5; }));
}

void VoxelGrid::validate() const {
  if (dims_.depth < 1 || dims_.height < 1 || dims_.width < 1 || values_.size() != dims_.count()) {
    throw Error(Errc::InvalidGrid, "inconsistent grid dims");
  }
  if (!all_finite()) throw Error(Errc::InvalidGrid, "grid contains non-finite values");
}

std::size_t Image2D::foreground_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](double v) { return v > 0.5; }));
}

void Prior2D::validate(bool require_foreground) const {
  if (fluorescence.height != mask.height || fluorescence.width != mask.width) {
    throw Error(Errc::DimMismatch, "prior channels differ in shape");
  }
  if (mask.values.size() != static_cast<std::size_t>(mask.height) * mask.width ||
      fluorescence.values.size() != mask.values.size()) {
    throw Error(Errc::InvalidGrid, "prior channel size inconsistent");
  }
  for (double v : mask.values) {
    if (v != 0.0 && v != 1.0) throw Error(Errc::InvalidGrid, "prior mask is not binary");
  }
  for (double v : fluorescence.values) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw Error(Errc::InvalidGrid, "fluorescence outside [0,1]");
    }
  }
  if (require_foreground && mask.foreground_count() == 0) {
    throw Error(Errc::EmptySlice, "prior mask has no foreground");
  }
}

// ---------------------------------------------------------------------------
// VOX3 encoding

namespace {

constexpr char kMagic[4] = {'V', 'O', 'X', '3'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_all(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_voxel(const VoxelGrid& grid, VoxelDtype dtype) {
  grid.validate();
  const auto& d = grid.dims();
  if (d.depth > kMaxFileDim || d.height > kMaxFileDim || d.width > kMaxFileDim) {
    throw Error(Errc::DimOverflow, "dimension exceeds 1024");
  }
  std::vector<std::uint8_t> out;
  const std::size_t elem = dtype == VoxelDtype::U8 ? 1 : 4;
  out.reserve(kVoxHeaderBytes + elem * grid.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.insert(out.end(), 3, 0);
  put_u32(out, static_cast<std::uint32_t>(d.depth));
  put_u32(out, static_cast<std::uint32_t>(d.height));
  put_u32(out, static_cast<std::uint32_t>(d.width));

  if (dtype == VoxelDtype::U8) {
    if (!grid.is_binary()) throw Error(Errc::InvalidGrid, "u8 encoding requires a binary grid");
    for (double v : grid.values()) out.push_back(v != 0.0 ? 1 : 0);
  } else {
    for (double v : grid.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

VoxelGrid decode_voxel(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(Errc::BadMagic, "missing VOX3 magic");
  }
  if (bytes.size() < kVoxHeaderBytes) throw Error(Errc::TruncatedFile, "header truncated");
  const std::uint8_t tag = bytes[4];
  if (tag > 1) throw Error(Errc::BadMagic, "unknown dtype tag " + std::to_string(tag));
  const std::uint32_t d = get_u32(&bytes[8]);
  const std::uint32_t h = get_u32(&bytes[12]);
  const std::uint32_t w = get_u32(&bytes[16]);
  if (d > kMaxFileDim || h > kMaxFileDim || w > kMaxFileDim) {
    throw Error(Errc::DimOverflow, "dimension exceeds 1024");
  }
  if (d == 0 || h == 0 || w == 0) throw Error(Errc::InvalidGrid, "zero dimension in header");
  const Dims3 dims{static_cast<int>(d), static_cast<int>(h), static_cast<int>(w)};
  const std::size_t n = dims.count();
  const std::size_t elem = tag == 0 ? 1 : 4;
  if (bytes.size() < kVoxHeaderBytes + n * elem) throw Error(Errc::TruncatedFile, "payload truncated");

  std::vector<double> values(n);
  const std::uint8_t* payload = bytes.data() + kVoxHeaderBytes;
  if (tag == 0) {
    for (std::size_t i = 0; i < n; ++i) values[i] = payload[i] != 0 ? 1.0 : 0.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const float f = std::bit_cast<float>(get_u32(payload + 4 * i));
      if (!std::isfinite(f)) throw Error(Errc::InvalidGrid, "non-finite value in payload");
      values[i] = f;
    }
  }
  return VoxelGrid(dims, std::move(values));
}

void write_voxel_file(const VoxelGrid& grid, const std::filesystem::path& path, VoxelDtype dtype) {
  write_all(path, encode_voxel(grid, dtype));
}

VoxelGrid read_voxel_file(const std::filesystem::path& path) { return decode_voxel(read_all(path)); }

void write_prior_file(const Prior2D& prior, const std::filesystem::path& path) {
  prior.validate(false);
  VoxelGrid stacked(Dims3{2, prior.height(), prior.width()});
  std::copy(prior.fluorescence.values.begin(), prior.fluorescence.values.end(), stacked.values().begin());
  std::copy(prior.mask.values.begin(), prior.mask.values.end(),
            stacked.values().begin() + static_cast<std::ptrdiff_t>(prior.mask.values.size()));
  write_voxel_file(stacked, path, VoxelDtype::F32);
}

Prior2D read_prior_file(const std::filesystem::path& path) {
  const VoxelGrid stacked = read_voxel_file(path);
  if (stacked.depth() != 2) throw Error(Errc::InvalidGrid, "prior file must hold exactly 2 slices");
  Prior2D prior;
  prior.fluorescence = Image2D(stacked.height(), stacked.width());
  prior.mask = Image2D(stacked.height(), stacked.width());
  const auto plane = static_cast<std::ptrdiff_t>(prior.mask.values.size());
  std::copy(stacked.values().begin(), stacked.values().begin() + plane, prior.fluorescence.values.begin());
  std::copy(stacked.values().begin() + plane, stacked.values().end(), prior.mask.values.begin());
  prior.validate(false);
  return prior;
}

// ---------------------------------------------------------------------------

Prior2D extract_prior(const VoxelGrid& grid, const VoxelGrid* intensity) {
  grid.validate();
  if (!grid.is_binary()) throw Error(Errc::InvalidGrid, "extract_prior requires a binary grid");
  if (intensity && intensity->dims() != grid.dims()) {
    throw Error(Errc::DimMismatch, "intensity grid differs in shape");
  }
  const int z = grid.depth() / 2;
  Prior2D prior;
  prior.mask = Image2D(grid.height(), grid.width());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) prior.mask.at(y, x) = grid.at(z, y, x);
  }
  if (prior.mask.foreground_count() == 0) throw Error(Errc::EmptySlice, "central slice is empty");
  if (intensity) {
    prior.fluorescence = Image2D(grid.height(), grid.width());
    for (int y = 0; y < grid.height(); ++y) {
      for (int x = 0; x < grid.width(); ++x) {
        prior.fluorescence.at(y, x) = std::clamp(intensity->at(z, y, x), 0.0, 1.0);
      }
    }
  } else {
    prior.fluorescence = prior.mask;
  }
  return prior;
}

int count_components6(const VoxelGrid& grid) {
  const Dims3 d = grid.dims();
  std::vector<std::uint8_t> seen(grid.size(), 0);
  std::vector<std::size_t> stack;
  int components = 0;
  for (std::size_t start = 0; start < grid.size(); ++start) {
    if (seen[start] || grid.values()[start] <= 0.5) continue;
    ++components;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(i % d.width);
      const int y = static_cast<int>((i / d.width) % d.height);
      const int z = static_cast<int>(i / (static_cast<std::size_t>(d.width) * d.height));
      const int nb[6][3] = {{z - 1, y, x}, {z + 1, y, x}, {z, y - 1, x},
                            {z, y + 1, x}, {z, y, x - 1}, {z, y, x + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[1] < 0 || n[2] < 0 || n[0] >= d.depth || n[1] >= d.height || n[2] >= d.width) continue;
        const std::size_t j = grid.index(n[0], n[1], n[2]);
        if (!seen[j] && grid.values()[j] > 0.5) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
  }
  return components;
}

// ---------------------------------------------------------------------------
// Manifest

void Manifest::validate() const {
  std::set<std::string> ids;
  std::set<int> folds;
  for (const auto& r : records) {
    if (r.id.empty()) throw Error(Errc::BadManifest, "empty id");
    if (!ids.insert(r.id).second) throw Error(Errc::BadManifest, "duplicate id " + r.id);
    if (r.fold < 0 || r.fold > 4) throw Error(Errc::BadManifest, "fold out of range for " + r.id);
    folds.insert(r.fold);
  }
  if (records.size() >= 5 && folds.size() != 5) {
    throw Error(Errc::BadManifest, "not every fold 0..4 is represented");
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void check_field(const std::string& f) {
  if (f.find_first_of(",\n\r\"") != std::string::npos) {
    throw Error(Errc::BadManifest, "manifest field contains a reserved character: " + f);
  }
}

}  // namespace

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.records) {
    for (const auto* f : {&r.id, &r.voxel_path, &r.prior_path, &r.class_label}) check_field(*f);
    out << r.id << ',' << r.voxel_path << ',' << r.prior_path << ',' << r.class_label << ',' << r.fold << '\n';
  }
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::BadManifest, "empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) throw Error(Errc::BadManifest, "unexpected header: " + line);
  Manifest m;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 5) throw Error(Errc::BadManifest, "line " + std::to_string(lineno) + ": expected 5 fields");
    ManifestRecord r{f[0], f[1], f[2], f[3], 0};
    try {
      std::size_t used = 0;
      r.fold = std::stoi(f[4], &used);
      if (used != f[4].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(Errc::BadManifest, "line " + std::to_string(lineno) + ": bad fold");
    }
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

std::vector<Sample> load_samples(const Manifest& manifest, const std::filesystem::path& manifest_path,
                                 bool with_targets) {
  const auto base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<Sample> out;
  out.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    Sample s;
    s.id = r.id;
    s.class_label = r.class_label;
    s.fold = r.fold;
    s.prior = read_prior_file(resolve(r.prior_path));
    if (with_targets && !r.voxel_path.empty()) {
      s.target = read_voxel_file(resolve(r.voxel_path));
      if (s.target->height() != s.prior.height() || s.target->width() != s.prior.width()) {
        throw Error(Errc::DimMismatch, "prior and target disagree in plane size for " + r.id);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace voxdiff
