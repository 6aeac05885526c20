#include "gda/clf/classifier.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <set>

#include "gda/core/archive.hpp"
#include "gda/fen/fen.hpp"
#include "gda/nn/losses.hpp"
#include "gda/nn/optim.hpp"

using nlohmann::json;

namespace gda::clf {

using namespace gda::nn;

nn::Net build_classifier_net(int num_classes, Rng& rng) {
    Net net;
    net.add<Linear>(fen::kClassEmbedDim, 128, true, rng);
    net.add<ReLU>();
    net.add<Linear>(128, 64, true, rng);
    net.add<ReLU>();
    net.add<Linear>(64, 16, true, rng);
    net.add<ReLU>();
    net.add<Linear>(16, num_classes, true, rng);
    return net;
}

AttributionClassifier train_classifier(const Tensor& embeddings, const std::vector<int>& labels,
                                       const data::LabelSpace& label_space, const ClfConfig& cfg,
                                       bool verbose) {
    const int n = embeddings.dim(0);
    check(n > 0 && embeddings.rank() == 2 && embeddings.dim(1) == fen::kClassEmbedDim,
          "train_classifier: embeddings must be (N, 2048)");
    check(static_cast<int>(labels.size()) == n, "train_classifier: label count mismatch");
    {
        std::set<int> present(labels.begin(), labels.end());
        for (int k = 0; k < label_space.size(); ++k)
            check(present.count(k), "train_classifier: class '" + label_space.classes[static_cast<size_t>(k)] +
                                        "' missing from training stream");
    }

    AttributionClassifier clf;
    clf.label_space = label_space;
    clf.config = cfg;
    Rng init(cfg.seed, "clf/init");
    clf.net = build_classifier_net(label_space.size(), init);

    Adam opt(clf.net.params(), cfg.lr);
    const int batch = std::min(cfg.batch, n);
    const int steps = n / batch;
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    Tensor xb({batch, fen::kClassEmbedDim});
    std::vector<int> yb(static_cast<size_t>(batch));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng order_rng(cfg.seed, "clf/order/" + std::to_string(epoch));
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        for (int step = 0; step < steps; ++step) {
            for (int i = 0; i < batch; ++i) {
                const int src = order[static_cast<size_t>(step * batch + i)];
                std::copy(embeddings.data() + static_cast<int64_t>(src) * fen::kClassEmbedDim,
                          embeddings.data() + static_cast<int64_t>(src + 1) * fen::kClassEmbedDim,
                          xb.data() + static_cast<int64_t>(i) * fen::kClassEmbedDim);
                yb[static_cast<size_t>(i)] = labels[static_cast<size_t>(src)];
            }
            clf.net.zero_grads();
            Tensor logits = clf.net.forward(xb, true);
            Tensor dlogits;
            const float loss = softmax_xent(logits, yb, dlogits);
            check(std::isfinite(loss), "train_classifier: non-finite loss, aborting");
            clf.net.backward(dlogits);
            opt.step();
            loss_sum += loss;
        }
        if (verbose && (epoch % 10 == 9 || epoch == 0))
            std::printf("  [clf] epoch %d: xent %.4f\n", epoch, loss_sum / steps);
    }

    const std::vector<int> pred = predict_batch(clf, embeddings);
    int64_t hits = 0;
    for (int i = 0; i < n; ++i)
        if (pred[static_cast<size_t>(i)] == labels[static_cast<size_t>(i)]) ++hits;
    clf.train_accuracy = static_cast<float>(hits) / static_cast<float>(n);
    return clf;
}

std::vector<int> predict_batch(AttributionClassifier& clf, const Tensor& embeddings,
                               Tensor* probs_out) {
    const int n = embeddings.dim(0);
    check(embeddings.rank() == 2 && embeddings.dim(1) == fen::kClassEmbedDim,
          "predict: embedding dimension must be 2048");
    Tensor logits = clf.net.forward(embeddings, false);
    Tensor probs = softmax(logits);
    const int k = probs.dim(1);
    std::vector<int> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const float* row = probs.data() + static_cast<int64_t>(i) * k;
        int arg = 0;
        for (int j = 1; j < k; ++j)
            if (row[j] > row[arg]) arg = j;
        out[static_cast<size_t>(i)] = arg;
    }
    if (probs_out) *probs_out = std::move(probs);
    return out;
}

Prediction predict(AttributionClassifier& clf, const Tensor& single_embedding) {
    Tensor x = single_embedding;
    if (x.rank() == 1) x = x.reshaped({1, static_cast<int>(x.numel())});
    check(x.rank() == 2 && x.dim(0) == 1, "predict: expected one embedding");
    Tensor probs;
    const auto labels = predict_batch(clf, x, &probs);
    Prediction p;
    p.label = labels[0];
    p.probs.assign(probs.data(), probs.data() + probs.numel());
    return p;
}

void AttributionClassifier::save(const std::string& path) const {
    TensorArchive ar;
    net.save_into(ar, "clf");
    json meta = {{"kind", "attribution_classifier"},
                 {"classes", label_space.classes},
                 {"train_accuracy", train_accuracy},
                 {"config",
                  {{"epochs", config.epochs},
                   {"batch", config.batch},
                   {"lr", config.lr},
                   {"seed", config.seed}}}};
    ar.put_meta(meta.dump(2));
    ar.save(path);
}

AttributionClassifier AttributionClassifier::load(const std::string& path) {
    TensorArchive ar = TensorArchive::load(path);
    json meta = json::parse(ar.meta());
    check(meta.value("kind", "") == "attribution_classifier",
          "clf: not a classifier checkpoint: " + path);
    AttributionClassifier clf;
    clf.label_space.classes = meta.at("classes").get<std::vector<std::string>>();
    clf.label_space.validate();
    clf.train_accuracy = meta.at("train_accuracy").get<float>();
    clf.config.epochs = meta.at("config").at("epochs").get<int>();
    clf.config.batch = meta.at("config").at("batch").get<int>();
    clf.config.lr = meta.at("config").at("lr").get<float>();
    clf.config.seed = meta.at("config").at("seed").get<uint64_t>();
    Rng dummy(1);
    clf.net = build_classifier_net(clf.label_space.size(), dummy);
    clf.net.load_from(ar, "clf");
    return clf;
}

} // namespace gda::clf
