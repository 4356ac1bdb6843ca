#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "ursa/models.hpp"
#include "ursa/textproc.hpp"

namespace ursa {

inline constexpr const char* checkpoint_format = "ursa-checkpoint";
inline constexpr int checkpoint_version = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  Model model;
  Vocabulary vocab;
};

inline nlohmann::ordered_json checkpoint_json(Model& model, const Vocabulary& vocab) {
  nlohmann::ordered_json j;
  j["format"] = checkpoint_format;
  j["version"] = checkpoint_version;
  j["arch"] = to_string(model.arch);
  j["hyperparams"] = nlohmann::json(model.hp);
  j["embedding_trainable"] = model.embedding.trainable;
  j["coverage"] = model.embedding.coverage;
  nlohmann::ordered_json tokens = nlohmann::ordered_json::array(), counts = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    tokens.push_back(vocab.token(static_cast<TokenId>(i)));
    counts.push_back(vocab.frequency(static_cast<TokenId>(i)));
  }
  j["vocab"] = {{"tokens", tokens}, {"counts", counts}};
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const Param* p : model.all_parameters())
    params[p->name] = {{"shape", p->value.shape()}, {"data", p->value.storage()}};
  j["params"] = params;
  return j;
}

inline void save_checkpoint(std::ostream& os, Model& model, const Vocabulary& vocab) {
  os << checkpoint_json(model, vocab).dump() << '\n';
}

inline void save_checkpoint(const std::string& path, Model& model, const Vocabulary& vocab) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write checkpoint " + path);
  save_checkpoint(os, model, vocab);
  if (!os) throw CheckpointError("failed writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != checkpoint_format) throw CheckpointError("not a checkpoint file");
    if (j.at("version") != checkpoint_version)
      throw CheckpointError("unsupported checkpoint version " + j.at("version").dump());

    Checkpoint ck;
    const auto& tokens = j.at("vocab").at("tokens");
    const auto& counts = j.at("vocab").at("counts");
    if (tokens.size() != counts.size() || tokens.size() < 2) throw CheckpointError("malformed vocabulary");
    for (std::size_t i = 2; i < tokens.size(); ++i)
      ck.vocab.add(tokens[i].get<std::string>(), counts[i].get<std::size_t>());

    const Architecture arch = parse_architecture(j.at("arch").get<std::string>());
    const HyperParams hp = j.at("hyperparams").get<HyperParams>();
    EmbeddingMatrix emb;
    emb.weights = Param("embedding", Tensor({ck.vocab.size(), hp.embedding_dim}), true, true);
    emb.coverage = j.at("coverage").get<double>();
    Rng rng(0);
    ck.model = build_model(arch, hp, std::move(emb), rng);
    ck.model.embedding.trainable = j.at("embedding_trainable").get<bool>();

    const auto& params = j.at("params");
    auto all = ck.model.all_parameters();
    if (params.size() != all.size()) throw CheckpointError("checkpoint parameter set does not match the architecture");
    for (Param* p : all) {
      if (!params.contains(p->name)) throw CheckpointError("checkpoint lacks parameter " + p->name);
      const auto& e = params.at(p->name);
      const Shape shape = e.at("shape").get<Shape>();
      if (shape != p->value.shape())
        throw CheckpointError("parameter " + p->name + " has shape " + shape_str(shape) + ", expected " +
                              shape_str(p->value.shape()));
      std::vector<double> data = e.at("data").get<std::vector<double>>();
      if (data.size() != p->value.size()) throw CheckpointError("parameter " + p->name + " has wrong element count");
      p->value = Tensor(shape, std::move(data));
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  return load_checkpoint(in);
}

}  // namespace ursa
