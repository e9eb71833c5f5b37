#include "kge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

namespace kge {

namespace {

void collect_payload(const ModelParams& params, std::vector<const std::vector<double>*>& out) {
  out.push_back(&params.entities.re());
  out.push_back(&params.entities.im());
  out.push_back(&params.relations.re());
  out.push_back(&params.relations.im());
  if (params.kind != ModelKind::kConEx) return;
  const ConvParams& c = params.conv;
  out.push_back(&c.kernels);
  out.push_back(&c.weight);
  out.push_back(&c.bias);
  for (const BatchNormParams* bn : {&c.bn_input, &c.bn_feature, &c.bn_proj}) {
    out.push_back(&bn->scale);
    out.push_back(&bn->shift);
    out.push_back(&bn->running_mean);
    out.push_back(&bn->running_var);
  }
}

void collect_payload_mut(ModelParams& params, std::vector<std::vector<double>*>& out) {
  out.push_back(&params.entities.re());
  out.push_back(&params.entities.im());
  out.push_back(&params.relations.re());
  out.push_back(&params.relations.im());
  if (params.kind != ModelKind::kConEx) return;
  ConvParams& c = params.conv;
  out.push_back(&c.kernels);
  out.push_back(&c.weight);
  out.push_back(&c.bias);
  for (BatchNormParams* bn : {&c.bn_input, &c.bn_feature, &c.bn_proj}) {
    out.push_back(&bn->scale);
    out.push_back(&bn->shift);
    out.push_back(&bn->running_mean);
    out.push_back(&bn->running_var);
  }
}

void write_doubles_le(std::ostream& out, const std::vector<double>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      char buf[8];
      for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      out.write(buf, 8);
    }
  }
}

bool read_doubles_le(std::istream& in, std::vector<double>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    return static_cast<std::size_t>(in.gcount()) == values.size() * sizeof(double);
  } else {
    for (double& v : values) {
      char buf[8];
      in.read(buf, 8);
      if (in.gcount() != 8) return false;
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
      std::memcpy(&v, &bits, sizeof(v));
    }
    return true;
  }
}

}  // namespace

std::size_t checkpoint_payload_size(const CheckpointMeta& meta) {
  const std::size_t d = static_cast<std::size_t>(meta.dim);
  std::size_t n = 2 * static_cast<std::size_t>(meta.num_entities) * d +
                  2 * static_cast<std::size_t>(meta.num_relations) * d;
  if (meta.kind == ModelKind::kConEx) {
    const std::size_t c = static_cast<std::size_t>(meta.channels);
    n += c * 9;             // kernels
    n += (c * 4 * d) * (2 * d);  // affine weight
    n += 2 * d;             // affine bias
    n += 4 * (1 + c + 2 * d);  // per-layer scale/shift/running mean/running var
  }
  return n;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     std::uint64_t vocab_hash, std::int64_t epoch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(CheckpointErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << kCheckpointMagic << "\n";
  out << "kind=" << to_string(params.kind) << "\n";
  out << "d=" << params.dim << "\n";
  out << "c=" << params.channels << "\n";
  out << "num_entities=" << params.num_entities() << "\n";
  out << "num_relations=" << params.num_relations() << "\n";
  out << "seed=" << params.seed << "\n";
  out << "vocab_hash=" << vocab_hash << "\n";
  out << "epoch=" << epoch << "\n";
  out << "\n";
  std::vector<const std::vector<double>*> tensors;
  collect_payload(params, tensors);
  for (const auto* t : tensors) write_doubles_le(out, *t);
  if (!out) throw CheckpointError(CheckpointErrorCode::kIo, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorCode::kIo, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic)
    throw CheckpointError(CheckpointErrorCode::kBadMagic, "bad magic in " + path.string());

  std::map<std::string, std::string> meta_kv;
  while (std::getline(in, line)) {
    if (line.empty()) break;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CheckpointError(CheckpointErrorCode::kBadMetadata, "malformed metadata line '" + line + "'");
    meta_kv[line.substr(0, eq)] = line.substr(eq + 1);
  }

  auto need = [&meta_kv, &path](const std::string& key) -> const std::string& {
    auto it = meta_kv.find(key);
    if (it == meta_kv.end())
      throw CheckpointError(CheckpointErrorCode::kBadMetadata,
                            "missing metadata key '" + key + "' in " + path.string());
    return it->second;
  };

  CheckpointMeta meta;
  try {
    meta.kind = model_kind_from_string(need("kind"));
    meta.dim = std::stoi(need("d"));
    meta.channels = std::stoi(need("c"));
    meta.num_entities = std::stoll(need("num_entities"));
    meta.num_relations = std::stoll(need("num_relations"));
    meta.seed = std::stoull(need("seed"));
    meta.vocab_hash = std::stoull(need("vocab_hash"));
    meta.epoch = std::stoll(need("epoch"));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointErrorCode::kBadMetadata, std::string("invalid metadata: ") + e.what());
  }
  if (meta.dim <= 0 || meta.num_entities <= 0 || meta.num_relations <= 0 ||
      (meta.kind == ModelKind::kConEx && meta.channels <= 0))
    throw CheckpointError(CheckpointErrorCode::kBadMetadata, "non-positive shape in metadata");

  Checkpoint ckpt;
  ckpt.meta = meta;
  ModelParams& p = ckpt.params;
  p.kind = meta.kind;
  p.dim = meta.dim;
  p.channels = meta.kind == ModelKind::kConEx ? meta.channels : 0;
  p.seed = meta.seed;
  p.entities = EmbeddingTable(static_cast<std::size_t>(meta.num_entities), static_cast<std::size_t>(meta.dim));
  p.relations = EmbeddingTable(static_cast<std::size_t>(meta.num_relations), static_cast<std::size_t>(meta.dim));
  if (meta.kind == ModelKind::kConEx) p.conv = ConvParams::zeros(meta.dim, meta.channels);

  std::vector<std::vector<double>*> tensors;
  collect_payload_mut(p, tensors);
  for (auto* t : tensors) {
    if (!read_doubles_le(in, *t))
      throw CheckpointError(CheckpointErrorCode::kTruncatedPayload, "truncated payload in " + path.string());
  }
  // Exactly the declared payload, nothing more.
  char extra;
  if (in.read(&extra, 1), in.gcount() != 0)
    throw CheckpointError(CheckpointErrorCode::kShapeMismatch,
                          "payload longer than the declared shape in " + path.string());
  return ckpt;
}

}  // namespace kge
