#include <fstream>

#include "ccm/model.hpp"
#include "json.hpp"

namespace ccm {

using ordered_json = nlohmann::ordered_json;

std::string model_to_json(const CcmModel& model) {
  ordered_json doc;
  doc["g"] = model.g;
  ordered_json part = ordered_json::array();
  for (int k = 0; k < model.g; ++k) {
    ordered_json comp = ordered_json::array();
    for (int b = 0; b < model.partition.n_blocks(k); ++b) comp.push_back(model.partition.block(k, b));
    part.push_back(comp);
  }
  doc["partition"] = part;
  doc["pi"] = model.pi;
  ordered_json blocks = ordered_json::array();
  for (int k = 0; k < model.g; ++k) {
    ordered_json comp = ordered_json::array();
    for (int b = 0; b < model.partition.n_blocks(k); ++b) {
      const auto& th = model.blocks[k][b];
      ordered_json blk;
      blk["rho"] = th.rho;
      blk["alpha"] = th.alpha;
      // Maximum dependency parameters are undefined at rho == 0 and for
      // single-variable blocks; they are not serialized.
      if (th.rho > 0.0 && th.maxdep) {
        blk["tau"] = th.maxdep->tau;
        blk["delta_images"] = th.maxdep->links;
      }
      comp.push_back(blk);
    }
    blocks.push_back(comp);
  }
  doc["blocks"] = blocks;
  if (model.meta) {
    ordered_json meta;
    meta["loglik"] = model.meta->loglik;
    meta["bic"] = model.meta->bic;
    meta["nu"] = model.meta->nu;
    meta["n"] = model.meta->n;
    meta["seed"] = model.meta->seed;
    doc["meta"] = meta;
  }
  return doc.dump(2) + "\n";
}

CcmModel model_from_json(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model file: invalid JSON: ") + e.what());
  }
  CcmModel model;
  try {
    model.g = doc.at("g").get<int>();
    std::vector<BlockPartition::ComponentBlocks> raw =
        doc.at("partition").get<std::vector<BlockPartition::ComponentBlocks>>();
    model.pi = doc.at("pi").get<std::vector<double>>();

    // Recover per-variable modality counts from the alpha vector lengths.
    int d = 0;
    for (const auto& comp : raw)
      for (const auto& blk : comp)
        for (int j : blk) d = std::max(d, j);
    if (d < 1) throw InputError("model file: empty partition");
    model.m.assign(d, 0);
    const auto& blocks_doc = doc.at("blocks");
    if (blocks_doc.size() != raw.size()) throw InputError("model file: blocks/partition mismatch");
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (blocks_doc[k].size() != raw[k].size())
        throw InputError("model file: blocks/partition mismatch in component");
      for (std::size_t b = 0; b < raw[k].size(); ++b) {
        const auto alpha = blocks_doc[k][b].at("alpha").get<std::vector<std::vector<double>>>();
        if (alpha.size() != raw[k][b].size())
          throw InputError("model file: alpha count does not match block size");
        for (std::size_t t = 0; t < alpha.size(); ++t) {
          const int j = raw[k][b][t];
          const int mj = static_cast<int>(alpha[t].size());
          if (model.m[j - 1] != 0 && model.m[j - 1] != mj)
            throw InputError("model file: inconsistent modality count for variable " +
                             std::to_string(j));
          model.m[j - 1] = mj;
        }
      }
    }
    for (int j = 0; j < d; ++j)
      if (model.m[j] == 0) throw InputError("model file: variable missing from a component");

    // Block parameters are matched to blocks by position, so the serialized
    // partition must already be in canonical order.
    model.partition = BlockPartition::canonical(raw, model.m);
    for (int k = 0; k < model.partition.g(); ++k)
      if (model.partition.component(k) != raw[k])
        throw InputError("model file: partition is not in canonical order");
    model.blocks.resize(model.g);
    for (int k = 0; k < model.g; ++k) {
      model.blocks[k].resize(model.partition.n_blocks(k));
      for (int b = 0; b < model.partition.n_blocks(k); ++b) {
        const auto& blk = blocks_doc[k][b];
        BlockParams th;
        th.rho = blk.at("rho").get<double>();
        th.alpha = blk.at("alpha").get<std::vector<std::vector<double>>>();
        if (blk.contains("tau")) {
          MaxDepParams mp;
          mp.tau = blk.at("tau").get<std::vector<double>>();
          mp.links = blk.at("delta_images").get<std::vector<std::vector<int>>>();
          th.maxdep = std::move(mp);
        }
        model.blocks[k][b] = std::move(th);
      }
    }
    if (doc.contains("meta")) {
      FitMeta meta;
      const auto& md = doc["meta"];
      meta.loglik = md.value("loglik", 0.0);
      meta.bic = md.value("bic", 0.0);
      meta.nu = md.value("nu", 0LL);
      meta.n = md.value("n", 0);
      meta.seed = md.value("seed", uint64_t{0});
      model.meta = meta;
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model file: ") + e.what());
  }
  model.validate();
  return model;
}

void save_model(const CcmModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("model file: cannot write " + path);
  out << model_to_json(model);
}

CcmModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("model file: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace ccm
