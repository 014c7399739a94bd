// Python bindings for the main operations: vector primitives, clustering,
// verification/retrieval metrics, the linear classifier, template fusion,
// and the debias adapter.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kintools/clustering.hpp"
#include "kintools/dataset.hpp"
#include "kintools/debias.hpp"
#include "kintools/eval.hpp"
#include "kintools/fusion.hpp"
#include "kintools/svm.hpp"

namespace py = pybind11;
using namespace kintools;

namespace {

Embedding make_embedding(const std::string& id, std::vector<double> vec,
                         const std::optional<std::string>& fid,
                         const std::optional<std::string>& mid,
                         const std::optional<std::string>& subgroup, const std::string& modality) {
  Embedding e;
  e.id = id;
  e.vec = std::move(vec);
  e.fid = fid;
  e.mid = mid;
  e.subgroup = subgroup;
  e.modality = parse_modality(modality);
  return e;
}

SideInfo make_side_info(const std::vector<std::size_t>& rows, const std::vector<int>& classes,
                        int num_classes) {
  SideInfo s;
  s.member_rows = rows;
  s.classes = classes;
  s.num_classes = num_classes;
  return s;
}

}  // namespace

PYBIND11_MODULE(_kintools, m) {
  m.doc() = "kinship recognition toolkit on precomputed embeddings";

  py::register_exception<Error>(m, "KintoolsError");

  py::enum_<Modality>(m, "Modality")
      .value("still", Modality::Still)
      .value("track", Modality::Track)
      .value("audio", Modality::Audio);

  py::class_<Embedding>(m, "Embedding")
      .def(py::init(&make_embedding), py::arg("id"), py::arg("vec"), py::arg("fid") = py::none(),
           py::arg("mid") = py::none(), py::arg("subgroup") = py::none(),
           py::arg("modality") = "still")
      .def_readonly("id", &Embedding::id)
      .def_readonly("fid", &Embedding::fid)
      .def_readonly("mid", &Embedding::mid)
      .def_readonly("subgroup", &Embedding::subgroup)
      .def_readonly("vec", &Embedding::vec)
      .def_property_readonly("modality",
                             [](const Embedding& e) { return std::string(modality_name(e.modality)); });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def("add", &Dataset::add)
      .def("__len__", &Dataset::size)
      .def_property_readonly("dim", &Dataset::dim)
      .def("at", &Dataset::at, py::return_value_policy::copy);

  m.def("read_jsonl_file", &read_jsonl_file, py::arg("path"));

  // core
  m.def("l2_normalize",
        [](const std::vector<double>& v) { return l2_normalize(v); }, py::arg("vec"));
  m.def("cosine_similarity",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          return cosine_similarity(a, b);
        },
        py::arg("a"), py::arg("b"));

  // matcher
  m.def("match_decision",
        [](double score, double theta) { return match_decision(score, Threshold{theta}); },
        py::arg("score"), py::arg("theta"));
  m.def("score_matrix",
        [](const std::vector<std::vector<double>>& probe,
           const std::vector<std::vector<double>>& reference) {
          std::vector<Embedding> p, r;
          for (std::size_t i = 0; i < probe.size(); ++i)
            p.push_back(make_embedding("p" + std::to_string(i), probe[i], {}, {}, {}, "still"));
          for (std::size_t j = 0; j < reference.size(); ++j)
            r.push_back(make_embedding("r" + std::to_string(j), reference[j], {}, {}, {}, "still"));
          ScoreMatrix mtx = score_matrix(p, r);
          std::vector<std::vector<double>> rows;
          for (std::size_t i = 0; i < mtx.rows; ++i) rows.push_back(mtx.row(i));
          return rows;
        },
        py::arg("probe"), py::arg("reference"));

  // clustering
  py::class_<Partition>(m, "Partition")
      .def(py::init([](std::vector<int> labels, int k) { return Partition{std::move(labels), k}; }),
           py::arg("labels"), py::arg("k"))
      .def_readonly("labels", &Partition::labels)
      .def_readonly("k", &Partition::k);

  py::class_<SideInfo>(m, "SideInfo")
      .def(py::init(&make_side_info), py::arg("member_rows"), py::arg("classes"),
           py::arg("num_classes"))
      .def(py::init<>())
      .def_readonly("member_rows", &SideInfo::member_rows)
      .def_readonly("classes", &SideInfo::classes)
      .def_readonly("num_classes", &SideInfo::num_classes);

  py::class_<SscResult>(m, "SscResult")
      .def_readonly("partition", &SscResult::partition)
      .def_readonly("objective_curve", &SscResult::objective_curve)
      .def_readonly("confidence", &SscResult::confidence)
      .def_readonly("iterations", &SscResult::iterations)
      .def_readonly("converged", &SscResult::converged);

  m.def("category_utility", &category_utility, py::arg("s"), py::arg("h"));
  m.def("utility_as_distance", &utility_as_distance, py::arg("side"), py::arg("h"));
  m.def("nmi", &nmi, py::arg("a"), py::arg("b"));
  m.def("ssc_kmeans",
        [](const Dataset& data, const SideInfo& side, int k, double lambda, std::uint64_t seed,
           int max_iter, double tol) {
          return ssc_kmeans(data, side, k, lambda, seed, SscOptions{max_iter, tol});
        },
        py::arg("data"), py::arg("side"), py::arg("k"), py::arg("lambda_") = 1.0,
        py::arg("seed") = 0, py::arg("max_iter") = 300, py::arg("tol") = 1e-6);

  // dataset ops
  m.def("nearest_rank_percentile",
        [](std::vector<double> values, double pct) {
          return nearest_rank_percentile(std::move(values), pct);
        },
        py::arg("values"), py::arg("percentile"));
  m.def("track_match_decision", &track_match_decision, py::arg("sampled_scores"),
        py::arg("theta") = 0.25, py::arg("percentile") = 25.0);
  m.def("fuse_track", &fuse_track, py::arg("frames"));
  m.def("assign_folds", &assign_folds, py::arg("subject_pair_counts"), py::arg("k"));

  // eval
  py::class_<RateCounts>(m, "RateCounts")
      .def_readonly("tp", &RateCounts::tp)
      .def_readonly("fp", &RateCounts::fp)
      .def_readonly("tn", &RateCounts::tn)
      .def_readonly("fn", &RateCounts::fn)
      .def_readonly("far", &RateCounts::far)
      .def_readonly("fnr", &RateCounts::fnr)
      .def_readonly("tar", &RateCounts::tar)
      .def_readonly("accuracy", &RateCounts::accuracy);

  py::class_<RankedList>(m, "RankedList")
      .def(py::init([](std::string probe, std::vector<std::string> order,
                       std::set<std::string> relevant) {
             RankedList l;
             l.probe = std::move(probe);
             l.order = std::move(order);
             l.relevant = std::move(relevant);
             return l;
           }),
           py::arg("probe"), py::arg("order"), py::arg("relevant"))
      .def_readonly("probe", &RankedList::probe)
      .def_readonly("order", &RankedList::order)
      .def_readonly("scores", &RankedList::scores);

  auto make_pairs = [](const std::vector<double>& scores, const std::vector<bool>& genuine,
                       const std::vector<std::string>& rel,
                       const std::vector<std::string>& subgroup) {
    ScoredPairSet s;
    s.scores = scores;
    s.genuine = genuine;
    s.rel = rel;
    s.subgroup = subgroup;
    return s;
  };

  m.def("rates_at_threshold",
        [make_pairs](const std::vector<double>& scores, const std::vector<bool>& genuine,
                     double theta) { return rates_at_threshold(make_pairs(scores, genuine, {}, {}), theta); },
        py::arg("scores"), py::arg("genuine"), py::arg("theta"));
  m.def("optimal_threshold",
        [make_pairs](const std::vector<double>& scores, const std::vector<bool>& genuine) {
          return optimal_threshold(make_pairs(scores, genuine, {}, {}));
        },
        py::arg("scores"), py::arg("genuine"));
  m.def("threshold_for_far", &threshold_for_far, py::arg("imposter_scores"), py::arg("target_far"));
  m.def("tar_at_far",
        [make_pairs](const std::vector<double>& scores, const std::vector<bool>& genuine,
                     const std::vector<double>& targets) {
          auto points = tar_at_far(make_pairs(scores, genuine, {}, {}), targets);
          std::vector<std::tuple<double, double, double>> out;
          for (const auto& p : points) out.emplace_back(p.target, p.theta, p.tar);
          return out;
        },
        py::arg("scores"), py::arg("genuine"), py::arg("targets"));
  m.def("det_curve",
        [make_pairs](const std::vector<double>& scores, const std::vector<bool>& genuine) {
          RateCurve curve = det_curve(make_pairs(scores, genuine, {}, {}));
          std::vector<std::tuple<double, double, double, double>> out;
          for (const auto& p : curve.points) out.emplace_back(p.threshold, p.far, p.fnr, p.tar);
          return out;
        },
        py::arg("scores"), py::arg("genuine"));
  m.def("percent_error_far", &percent_error_far, py::arg("reported"), py::arg("actual"));
  m.def("average_precision", &average_precision, py::arg("ranked"));
  m.def("mean_average_precision", &mean_average_precision, py::arg("lists"));
  m.def("cmc",
        [](const std::vector<RankedList>& lists, const std::vector<int>& ranks) {
          CmcCurve curve = cmc(lists, ranks);
          return py::make_tuple(curve.cmc, curve.at_rank);
        },
        py::arg("lists"), py::arg("ranks"));
  m.def("confusion_matrix", &confusion_matrix, py::arg("predicted"), py::arg("truth"),
        py::arg("num_classes"));

  // svm
  py::class_<LinearModel>(m, "LinearModel")
      .def_readonly("w", &LinearModel::w)
      .def_readonly("lambda_pos", &LinearModel::lambda_pos)
      .def_readonly("lambda_neg", &LinearModel::lambda_neg)
      .def_readonly("objective", &LinearModel::objective)
      .def_readonly("iterations", &LinearModel::iterations)
      .def_readonly("converged", &LinearModel::converged);

  m.def("class_weights", &class_weights, py::arg("n_pos"), py::arg("n_neg"), py::arg("lambda_"));
  m.def("train_cwsvm",
        [](const std::vector<std::vector<double>>& pos, const std::vector<std::vector<double>>& neg,
           double lambda) { return train_cwsvm(pos, neg, lambda); },
        py::arg("pos"), py::arg("neg"), py::arg("lambda_") = 10.0);
  m.def("decision",
        [](const LinearModel& model, const std::vector<double>& x) { return decision(model, x); },
        py::arg("model"), py::arg("x"));

  // fusion
  py::class_<Template>(m, "Template")
      .def(py::init([](std::string fid, std::string mid, std::vector<Embedding> media) {
             Template t;
             t.fid = std::move(fid);
             t.mid = std::move(mid);
             t.media = std::move(media);
             return t;
           }),
           py::arg("fid"), py::arg("mid"), py::arg("media"))
      .def_readonly("fid", &Template::fid)
      .def_readonly("mid", &Template::mid)
      .def_readonly("media", &Template::media)
      .def("subject", &Template::subject);

  py::class_<AdaptedGallery>(m, "AdaptedGallery")
      .def_readonly("subjects", &AdaptedGallery::subjects)
      .def_readonly("models", &AdaptedGallery::models);

  m.def("score_fusion", &score_fusion, py::arg("a"), py::arg("b"));
  m.def("feature_fusion", &feature_fusion, py::arg("t"));
  m.def("tri_subject_score", &tri_subject_score, py::arg("father"), py::arg("mother"),
        py::arg("child"));
  m.def("probe_adaptation_score", &probe_adaptation_score, py::arg("p"), py::arg("q"),
        py::arg("negatives"), py::arg("lambda_") = 10.0);
  m.def("gallery_adapt", &gallery_adapt, py::arg("gallery"), py::arg("train_negatives"),
        py::arg("lambda_") = 10.0);
  m.def("rank_gallery", &rank_gallery, py::arg("probe"), py::arg("adapted"));

  // debias
  py::class_<LabeledFeature>(m, "LabeledFeature")
      .def(py::init([](std::vector<double> x, int y_id, int y_att) {
             LabeledFeature f;
             f.x = std::move(x);
             f.y_id = y_id;
             f.y_att = y_att;
             return f;
           }),
           py::arg("x"), py::arg("y_id"), py::arg("y_att"));

  py::class_<DebiasModel>(m, "DebiasModel")
      .def_readonly("in_dim", &DebiasModel::in_dim)
      .def_readonly("out_dim", &DebiasModel::out_dim)
      .def_readonly("lambda_", &DebiasModel::lambda);

  py::class_<DebiasTrainResult>(m, "DebiasTrainResult")
      .def_readonly("model", &DebiasTrainResult::model)
      .def_readonly("id_loss_per_epoch", &DebiasTrainResult::id_loss_per_epoch)
      .def_readonly("att_loss_per_epoch", &DebiasTrainResult::att_loss_per_epoch);

  m.def("train_debias",
        [](const std::vector<LabeledFeature>& data, double lambda, int epochs, double lr,
           std::uint64_t seed, std::size_t batch_size) {
          DebiasTrainOptions opts;
          opts.lambda = lambda;
          opts.epochs = epochs;
          opts.lr = lr;
          opts.seed = seed;
          opts.batch_size = batch_size;
          return train_debias(data, opts);
        },
        py::arg("data"), py::arg("lambda_"), py::arg("epochs") = 20, py::arg("lr") = 1e-3,
        py::arg("seed") = 0, py::arg("batch_size") = 32);
  m.def("debias_apply", &debias_apply, py::arg("model"), py::arg("x"));
  m.def("leakage_probe",
        [](const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
           int folds, const std::vector<std::size_t>& layers, int epochs, double lr,
           std::uint64_t seed) {
          ProbeOptions opts;
          opts.layers = layers;
          opts.epochs = epochs;
          opts.lr = lr;
          opts.seed = seed;
          ProbeResult r = leakage_probe(features, labels, folds, opts);
          return py::make_tuple(r.accuracy, r.fold_accuracy, r.confusion);
        },
        py::arg("features"), py::arg("labels"), py::arg("folds") = 2,
        py::arg("layers") = std::vector<std::size_t>{512, 512, 256}, py::arg("epochs") = 12,
        py::arg("lr") = 1e-3, py::arg("seed") = 0);
}
