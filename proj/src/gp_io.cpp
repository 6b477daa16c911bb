#include "mctopo/gp_io.hpp"

#include <fstream>
#include <sstream>

#include "mctopo/error.hpp"
#include "mctopo/io.hpp"

namespace mctopo::gp {

using nlohmann::json;

namespace {

template <typename Derived>
json rows_of(const Eigen::MatrixBase<Derived>& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

template <typename Derived>
json flat(const Eigen::MatrixBase<Derived>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::MatrixXd matrix_of(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw Error(ErrorKind::Io, "expected a non-empty matrix");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(rows.at(0).size());
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows.at(i).size()) != m)
      throw Error(ErrorKind::Io, "ragged matrix in model file");
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = rows.at(i).at(j).get<double>();
  }
  return out;
}

Eigen::VectorXd vector_of(const json& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v.at(i).get<double>();
  return out;
}

}  // namespace

json to_json(const MrLvgpModel& model, const json& meta) {
  json doc;
  doc["format"] = "mctopo.mrlvgp";
  doc["version"] = 1;
  doc["meta"] = meta;
  doc["levels"] = model.latent().n_levels();
  doc["latent"] = rows_of(model.latent().Z);
  doc["phi"] = flat(model.phi());
  doc["Bhat"] = flat(model.Bhat());
  doc["SigmaHat"] = rows_of(model.SigmaHat());
  doc["standardization"] = {{"x_lo", flat(model.x_lo())},
                            {"x_span", flat(model.x_span())},
                            {"y_mean", flat(model.y_mean())},
                            {"y_scale", flat(model.y_scale())}};
  doc["training"] = {{"x", rows_of(model.data().X)},
                     {"t", model.data().levels},
                     {"y", rows_of(model.data().Y)}};
  doc["nugget"] = model.nugget();
  doc["seed"] = model.seed();
  doc["objective"] = model.objective();
  return doc;
}

MrLvgpModel from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "mctopo.mrlvgp")
      throw Error(ErrorKind::Io, "not an MR-LVGP model document");
    Dataset data;
    data.n_levels = doc.at("levels").get<int>();
    data.X = matrix_of(doc.at("training").at("x"));
    data.Y = matrix_of(doc.at("training").at("y"));
    data.levels = doc.at("training").at("t").get<std::vector<int>>();
    LatentMap latent{matrix_of(doc.at("latent"))};
    MrLvgpModel model = MrLvgpModel::build(std::move(data), std::move(latent),
                                           vector_of(doc.at("phi")), doc.at("nugget").get<double>(),
                                           doc.at("seed").get<std::uint64_t>());
    const Eigen::VectorXd bhat = vector_of(doc.at("Bhat"));
    const Eigen::MatrixXd sigma = matrix_of(doc.at("SigmaHat"));
    const double tol = 1e-9;
    if (bhat.size() != model.Bhat().size() ||
        (bhat - model.Bhat().transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + bhat.cwiseAbs().maxCoeff()) ||
        sigma.rows() != model.SigmaHat().rows() ||
        (sigma - model.SigmaHat()).cwiseAbs().maxCoeff() > tol * (1.0 + sigma.cwiseAbs().maxCoeff()))
      throw Error(ErrorKind::Io, "stored Bhat/SigmaHat disagree with the rebuilt model");
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const MrLvgpModel& model, const json& meta) {
  io::write_file_atomic(path, to_json(model, meta).dump(2) + "\n");
}

MrLvgpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open model file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, std::string("model file is not valid JSON: ") + e.what());
  }
  return from_json(doc);
}

}  // namespace mctopo::gp
