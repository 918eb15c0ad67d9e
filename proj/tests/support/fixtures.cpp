#include "fixtures.hpp"

namespace testsupport {

derm::DatasetManifest counted_manifest(const std::array<std::size_t, 9>& counts, const std::string& prefix) {
  derm::DatasetManifest m;
  for (std::size_t c = 0; c < 9; ++c) {
    for (std::size_t k = 0; k < counts[c]; ++k) {
      derm::ImageRecord r;
      r.id = prefix + kLabelNames[c] + "/" + std::to_string(k);
      r.path = "/nonexistent/" + r.id + ".png";
      r.label = derm::label_at(c);
      m.records.push_back(r);
    }
  }
  return m;
}

derm::DatasetManifest ingested_tree(const std::filesystem::path& root, std::size_t per_class, int side) {
  write_class_tree(root, per_class, side);
  return derm::ingest(root, derm::LabelMapping::defaults()).manifest;
}

derm::BuildOptions small_random_build(std::uint64_t seed, int crop) {
  derm::BuildOptions o;
  o.init = derm::WeightInit::kRandom;
  o.seed = seed;
  o.preprocessing.resize_shorter = crop;
  o.preprocessing.crop_side = crop;
  return o;
}

}  // namespace testsupport

namespace testsupport {

std::vector<derm::ImageRecord> image_records(const std::filesystem::path& root, std::size_t per_class, int side) {
  auto m = ingested_tree(root, per_class, side);
  for (auto& r : m.records) r.split = derm::Split::kTrain;
  return m.records;
}

namespace {

torch::Tensor batch_of(const derm::ModelHandle& h, const std::vector<cv::Mat>& images) {
  std::vector<torch::Tensor> items;
  for (const auto& img : images) items.push_back(h.input_tensor(img, false, nullptr));
  return torch::stack(items);
}

torch::Tensor labels_of(const std::vector<derm::DiseaseLabel>& labels) {
  std::vector<std::int64_t> v;
  for (auto l : labels) v.push_back(static_cast<std::int64_t>(derm::index_of(l)));
  return torch::tensor(v, torch::kInt64);
}

}  // namespace

double head_gradient_relative_error(const derm::ModelHandle& handle, const std::vector<cv::Mat>& images,
                                    const std::vector<derm::DiseaseLabel>& labels, std::size_t max_entries,
                                    std::uint64_t seed) {
  auto h = handle.clone();
  auto& net = h.network();
  net.to(torch::kFloat64);
  h.set_training(false);
  const auto x = batch_of(h, images).to(torch::kFloat64);
  const auto y = labels_of(labels);

  torch::Tensor features;
  {
    torch::NoGradGuard g;
    features = net.features(x);
  }
  auto& head = net.head();
  auto weight = head->weight;
  auto bias = head->bias;
  weight.mutable_grad() = torch::Tensor();
  bias.mutable_grad() = torch::Tensor();
  auto loss = torch::nn::functional::cross_entropy(head(features), y);
  loss.backward();
  const auto gw = weight.grad().clone();
  const auto gb = bias.grad().clone();

  torch::NoGradGuard g;
  auto loss_at = [&] { return torch::nn::functional::cross_entropy(head(features), y).item<double>(); };
  constexpr double kStep = 1e-6;
  double worst = 0.0;
  auto probe = [&](torch::Tensor param, std::int64_t flat, double analytic) {
    auto view = param.view(-1);
    const double original = view[flat].item<double>();
    view[flat] = original + kStep;
    const double up = loss_at();
    view[flat] = original - kStep;
    const double down = loss_at();
    view[flat] = original;
    const double numeric = (up - down) / (2.0 * kStep);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    // Entries with negligible gradient are compared absolutely.
    const double err = scale < 1e-8 ? std::abs(analytic - numeric) : std::abs(analytic - numeric) / scale;
    worst = std::max(worst, err);
  };
  derm::SeededRng rng(seed, 0x6AD);
  const auto n_weight = weight.numel();
  const auto flat_gw = gw.view(-1);
  for (std::size_t k = 0; k < max_entries; ++k) {
    const auto i = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n_weight)));
    probe(weight, i, flat_gw[i].item<double>());
  }
  for (std::int64_t i = 0; i < bias.numel(); ++i) probe(bias, i, gb[i].item<double>());
  return worst;
}

std::pair<double, double> single_step_losses(const derm::ModelHandle& handle, const std::vector<cv::Mat>& images,
                                             const std::vector<derm::DiseaseLabel>& labels, double lr) {
  auto h = handle.clone();
  h.set_training(false);
  const auto x = batch_of(h, images);
  const auto y = labels_of(labels);
  torch::optim::SGD sgd(h.trainable_parameters(), torch::optim::SGDOptions(lr));
  auto loss = torch::nn::functional::cross_entropy(h.logits(x), y);
  const double before = loss.item<double>();
  sgd.zero_grad();
  loss.backward();
  sgd.step();
  torch::NoGradGuard g;
  const double after = torch::nn::functional::cross_entropy(h.logits(x), y).item<double>();
  return {before, after};
}

}  // namespace testsupport
