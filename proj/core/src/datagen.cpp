#include "adagtcn/datagen.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "adagtcn/errors.hpp"

namespace adagtcn {

namespace {

constexpr std::uint32_t kFormatVersion = 1;
constexpr char kMagic[4] = {'A', 'G', 'T', '1'};

bool has_json_extension(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

// Explicit little-endian encoding keeps files portable across hosts.
template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

void put_f64(std::string& out, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  put_le(out, bits);
}

class Reader {
 public:
  Reader(std::string data, std::string path)
      : data_(std::move(data)), path_(std::move(path)) {}

  template <typename T>
  T take_le() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return value;
  }

  double take_f64() {
    const std::uint64_t bits = take_le<std::uint64_t>();
    double value;
    std::memcpy(&value, &bits, sizeof(value));
    return value;
  }

  std::string take_string(std::size_t len) {
    need(len);
    std::string s = data_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  std::size_t offset() const { return pos_; }
  bool exhausted() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t bytes) {
    if (pos_ + bytes > data_.size()) {
      throw DataError(path_ + ": truncated file at byte offset " + std::to_string(pos_));
    }
  }

  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

void validate_sample(const SessionSample& sample, std::size_t expected_rows,
                     std::size_t record) {
  if (sample.label != 0 && sample.label != 1) {
    throw DataError("record " + std::to_string(record) + ": label must be 0 or 1, got " +
                    std::to_string(sample.label));
  }
  if (sample.participant_id.empty()) {
    throw DataError("record " + std::to_string(record) + ": empty participant id");
  }
  if (sample.sequence.num_nodes() != expected_rows) {
    throw DataError("record " + std::to_string(record) + ": dimension mismatch, p = " +
                    std::to_string(sample.sequence.num_nodes()) + " but file header says " +
                    std::to_string(expected_rows));
  }
  if (!sample.sequence.features.all_finite()) {
    throw DataError("record " + std::to_string(record) + ": non-finite feature value");
  }
}

void save_binary(const std::vector<SessionSample>& samples, const std::string& path) {
  const std::size_t rows = samples.empty() ? 0 : samples[0].sequence.num_nodes();
  std::string out;
  out.append(kMagic, 4);
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rows));
  put_le<std::uint64_t>(out, samples.size());
  for (const SessionSample& sample : samples) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(sample.participant_id.size()));
    out += sample.participant_id;
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(sample.session_id.size()));
    out += sample.session_id;
    out.push_back(static_cast<char>(sample.label));
    const std::size_t n = sample.sequence.length();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
    for (double v : sample.sequence.features.data()) put_f64(out, v);
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open " + path + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::vector<SessionSample> load_binary(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open " + path);
  std::stringstream buffer;
  buffer << file.rdbuf();
  Reader reader(buffer.str(), path);

  const std::string magic = reader.take_string(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw DataError(path + ": bad magic at byte offset 0, expected \"AGT1\"");
  }
  const auto version = reader.take_le<std::uint32_t>();
  if (version != kFormatVersion) {
    throw DataError(path + ": unknown format version " + std::to_string(version));
  }
  const std::size_t rows = reader.take_le<std::uint32_t>();
  const std::uint64_t count = reader.take_le<std::uint64_t>();

  std::vector<SessionSample> samples;
  samples.reserve(count);
  for (std::uint64_t record = 0; record < count; ++record) {
    SessionSample sample;
    sample.participant_id = reader.take_string(reader.take_le<std::uint16_t>());
    sample.session_id = reader.take_string(reader.take_le<std::uint16_t>());
    sample.label = static_cast<int>(reader.take_le<std::uint8_t>());
    const std::size_t n = reader.take_le<std::uint32_t>();
    Tensor features({rows, n});
    for (std::size_t i = 0; i < rows * n; ++i) features[i] = reader.take_f64();
    sample.sequence.features = std::move(features);
    sample.sequence.mask.assign(n, 1);
    validate_sample(sample, rows, record);
    samples.push_back(std::move(sample));
  }
  if (!reader.exhausted()) {
    throw DataError(path + ": trailing bytes at offset " + std::to_string(reader.offset()));
  }
  return samples;
}

void save_json(const std::vector<SessionSample>& samples, const std::string& path) {
  nlohmann::json doc;
  doc["magic"] = "AGT1";
  doc["version"] = kFormatVersion;
  doc["p"] = samples.empty() ? 0 : samples[0].sequence.num_nodes();
  nlohmann::json sessions = nlohmann::json::array();
  for (const SessionSample& sample : samples) {
    nlohmann::json s;
    s["participant_id"] = sample.participant_id;
    s["session_id"] = sample.session_id;
    s["label"] = sample.label;
    const std::size_t n = sample.sequence.length();
    s["n"] = n;
    nlohmann::json matrix = nlohmann::json::array();
    for (std::size_t r = 0; r < sample.sequence.num_nodes(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t c = 0; c < n; ++c) row.push_back(sample.sequence.features.at(r, c));
      matrix.push_back(std::move(row));
    }
    s["features"] = std::move(matrix);
    sessions.push_back(std::move(s));
  }
  doc["sessions"] = std::move(sessions);
  std::ofstream file(path);
  if (!file) throw DataError("cannot open " + path + " for writing");
  file << doc.dump(2) << "\n";
}

std::vector<SessionSample> load_json(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw DataError("cannot open " + path);
  nlohmann::json doc;
  try {
    file >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": JSON parse failure: " + e.what());
  }
  try {
    if (doc.at("magic").get<std::string>() != "AGT1") {
      throw DataError(path + ": bad magic, expected \"AGT1\"");
    }
    const auto version = doc.at("version").get<std::uint32_t>();
    if (version != kFormatVersion) {
      throw DataError(path + ": unknown format version " + std::to_string(version));
    }
    const std::size_t rows = doc.at("p").get<std::size_t>();
    std::vector<SessionSample> samples;
    for (std::size_t record = 0; record < doc.at("sessions").size(); ++record) {
      const nlohmann::json& s = doc.at("sessions")[record];
      SessionSample sample;
      sample.participant_id = s.at("participant_id").get<std::string>();
      sample.session_id = s.at("session_id").get<std::string>();
      sample.label = s.at("label").get<int>();
      const std::size_t n = s.at("n").get<std::size_t>();
      const nlohmann::json& matrix = s.at("features");
      if (matrix.size() != rows) {
        throw DataError(path + ": record " + std::to_string(record) +
                        ": dimension mismatch, p = " + std::to_string(matrix.size()) +
                        " but file header says " + std::to_string(rows));
      }
      Tensor features({rows, n});
      for (std::size_t r = 0; r < rows; ++r) {
        if (matrix[r].size() != n) {
          throw DataError(path + ": record " + std::to_string(record) + ": row " +
                          std::to_string(r) + " has " + std::to_string(matrix[r].size()) +
                          " columns, expected " + std::to_string(n));
        }
        for (std::size_t c = 0; c < n; ++c) features.at(r, c) = matrix[r][c].get<double>();
      }
      sample.sequence.features = std::move(features);
      sample.sequence.mask.assign(n, 1);
      validate_sample(sample, rows, record);
      samples.push_back(std::move(sample));
    }
    return samples;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": malformed document: " + e.what());
  }
}

}  // namespace

void save_dataset(const std::vector<SessionSample>& samples, const std::string& path) {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].sequence.num_nodes() != samples[0].sequence.num_nodes()) {
      throw DataError("record " + std::to_string(i) + ": dimension mismatch, p = " +
                      std::to_string(samples[i].sequence.num_nodes()) + " vs " +
                      std::to_string(samples[0].sequence.num_nodes()));
    }
  }
  if (has_json_extension(path)) {
    save_json(samples, path);
  } else {
    save_binary(samples, path);
  }
}

std::vector<SessionSample> load_dataset(const std::string& path) {
  return has_json_extension(path) ? load_json(path) : load_binary(path);
}

PlantedWorld make_planted_world(std::size_t num_rows, std::size_t out_degree, RngEngine& rng) {
  if (out_degree + 1 > num_rows) {
    throw ConfigError("planted world: out-degree " + std::to_string(out_degree) +
                      " impossible with " + std::to_string(num_rows) + " nodes");
  }
  // Small-hub topology: a quarter of the nodes act as hubs and every node's
  // out-edges target distinct hubs, mirroring the clustered short-path
  // structure assumed for brain graphs.
  const std::size_t hub_count = std::max<std::size_t>(2, (num_rows + 3) / 4);
  std::vector<std::size_t> nodes(num_rows);
  std::iota(nodes.begin(), nodes.end(), std::size_t{0});
  rng.shuffle(nodes);
  std::vector<std::size_t> hubs(nodes.begin(), nodes.begin() + hub_count);

  PlantedWorld world;
  world.adjacency = Tensor({num_rows, num_rows});
  for (std::size_t src = 0; src < num_rows; ++src) {
    std::vector<std::size_t> choices = hubs;
    rng.shuffle(choices);
    std::size_t placed = 0;
    for (std::size_t hub : choices) {
      if (hub == src) continue;
      world.adjacency.at(src, hub) = 1.0;
      if (++placed == out_degree) break;  // fewer when out-degree exceeds the other hubs
    }
  }
  return world;
}

std::vector<SessionSample> generate_synthetic(const PlantedWorld& world,
                                              std::size_t num_sessions,
                                              std::size_t num_participants, RngEngine& rng) {
  if (num_participants < 3) {
    throw ConfigError("synthetic generation needs at least 3 participants for splits, got " +
                      std::to_string(num_participants));
  }
  const std::size_t rows = world.num_rows();
  std::vector<SessionSample> samples;
  samples.reserve(num_sessions);
  for (std::size_t s = 0; s < num_sessions; ++s) {
    const std::size_t n =
        world.min_length + rng.uniform_index(world.max_length - world.min_length + 1);
    // Labels alternate within each participant's session sequence so every
    // participant sees both classes (participants rotate round-robin).
    const int label = static_cast<int>((s / num_participants) % 2);

    Tensor features({rows, n});
    // smooth AR(1) background, independent per node
    for (std::size_t node = 0; node < rows; ++node) {
      double value = world.noise_sigma * rng.normal();
      features.at(node, 0) = value;
      for (std::size_t t = 1; t < n; ++t) {
        value = world.ar_coeff * value + world.noise_sigma * rng.normal();
        features.at(node, t) = value;
      }
    }
    if (label == 1) {
      // One spike per node in shuffled order, each relayed to the node's
      // planted neighbours one step later: every row of A* leaves a trace.
      // The seed keeps a decay tail, so its tail co-occurs with the
      // neighbours' onsets. Spike times are spread over the session with
      // jitter so separate events do not collide.
      std::vector<std::size_t> seeds(rows);
      std::iota(seeds.begin(), seeds.end(), std::size_t{0});
      rng.shuffle(seeds);
      const double slot = static_cast<double>(n - 1) / static_cast<double>(rows);
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        const std::size_t seed_node = seeds[k];
        const std::size_t at = std::min<std::size_t>(
            n - 2, static_cast<std::size_t>((static_cast<double>(k) + rng.uniform()) * slot));
        features.at(seed_node, at) += world.spike_amplitude;
        features.at(seed_node, at + 1) += world.tail * world.spike_amplitude;
        for (std::size_t dst = 0; dst < rows; ++dst) {
          if (world.adjacency.at(seed_node, dst) != 0.0) {
            features.at(dst, at + 1) += world.attenuation * world.spike_amplitude;
          }
        }
      }
    }

    SessionSample sample;
    sample.sequence.features = std::move(features);
    sample.sequence.mask.assign(n, 1);
    sample.label = label;
    char pid[24];
    std::snprintf(pid, sizeof(pid), "P%02zu", s % num_participants);
    sample.participant_id = pid;
    char sid[24];
    std::snprintf(sid, sizeof(sid), "S%04zu", s);
    sample.session_id = sid;
    samples.push_back(std::move(sample));
  }
  return samples;
}

namespace {

std::vector<std::string> distinct_participants(const std::vector<SessionSample>& samples) {
  std::vector<std::string> order;
  for (const SessionSample& sample : samples) {
    if (std::find(order.begin(), order.end(), sample.participant_id) == order.end()) {
      order.push_back(sample.participant_id);
    }
  }
  return order;
}

}  // namespace

SplitDatasets split_by_participant(const std::vector<SessionSample>& samples,
                                   const std::array<std::size_t, 3>& ratios,
                                   std::uint64_t seed) {
  std::vector<std::string> participants = distinct_participants(samples);
  const std::size_t m = participants.size();
  if (m < 3) {
    throw ConfigError("participant split needs at least 3 participants, got " +
                      std::to_string(m));
  }
  const double total = static_cast<double>(ratios[0] + ratios[1] + ratios[2]);

  // largest-remainder allocation with a floor of one participant per part
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(m) * static_cast<double>(ratios[i]) / total;
    counts[i] = static_cast<std::size_t>(exact);
    remainders[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < m) {
    const std::size_t pick = static_cast<std::size_t>(
        std::max_element(remainders.begin(), remainders.end()) - remainders.begin());
    ++counts[pick];
    remainders[pick] = -1.0;
    ++assigned;
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (counts[i] == 0) {
      const std::size_t donor = static_cast<std::size_t>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      --counts[donor];
      ++counts[i];
    }
  }

  RngEngine rng(seed);
  rng.shuffle(participants);
  SplitSpec spec;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < counts[0]; ++i) spec.train.push_back(participants[cursor++]);
  for (std::size_t i = 0; i < counts[1]; ++i) spec.val.push_back(participants[cursor++]);
  for (std::size_t i = 0; i < counts[2]; ++i) spec.test.push_back(participants[cursor++]);
  return split_by_participant(samples, spec);
}

SplitDatasets split_by_participant(const std::vector<SessionSample>& samples,
                                   const SplitSpec& spec) {
  const auto contains = [](const std::vector<std::string>& list, const std::string& id) {
    return std::find(list.begin(), list.end(), id) != list.end();
  };
  for (const std::string& id : spec.train) {
    if (contains(spec.val, id) || contains(spec.test, id)) {
      throw ConfigError("participant " + id + " appears in more than one split");
    }
  }
  for (const std::string& id : spec.val) {
    if (contains(spec.test, id)) {
      throw ConfigError("participant " + id + " appears in more than one split");
    }
  }

  SplitDatasets out;
  for (const SessionSample& sample : samples) {
    if (contains(spec.train, sample.participant_id)) {
      out.train.push_back(sample);
    } else if (contains(spec.val, sample.participant_id)) {
      out.val.push_back(sample);
    } else if (contains(spec.test, sample.participant_id)) {
      out.test.push_back(sample);
    } else {
      throw ConfigError("participant " + sample.participant_id + " missing from the split spec");
    }
  }
  return out;
}

double edge_precision(const Tensor& mask, const Tensor& reference) {
  const std::size_t p = mask.dim(0);
  std::size_t selected = 0, correct = 0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (i == j || mask.at(i, j) == 0.0) continue;
      ++selected;
      if (reference.at(i, j) != 0.0) ++correct;
    }
  }
  return selected == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(selected);
}

double edge_density(const Tensor& graph) {
  const std::size_t p = graph.dim(0);
  if (p < 2) return 0.0;
  std::size_t edges = 0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (i != j && graph.at(i, j) != 0.0) ++edges;
    }
  }
  return static_cast<double>(edges) / static_cast<double>(p * (p - 1));
}

}  // namespace adagtcn
