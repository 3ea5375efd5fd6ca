#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include "bicamo/edge_prior.hpp"
#include "bicamo/grid.hpp"

namespace bicamo {

// An (image, mask) pair with lazily computed edge priors, one per operator.
class Sample {
 public:
  Sample(std::string id, ImageRGB image, Grid mask)
      : id_(std::move(id)), image_(std::move(image)), mask_(std::move(mask)),
        priors_(std::make_shared<std::map<std::string, EdgePrior>>()) {
    if (mask_.height() != image_.height() || mask_.width() != image_.width()) {
      throw std::invalid_argument("Sample '" + id_ + "': image is " +
                                  std::to_string(image_.height()) + "x" +
                                  std::to_string(image_.width()) + " but mask is " +
                                  shape_string(mask_));
    }
    if (!is_binary(mask_)) throw std::invalid_argument("Sample '" + id_ + "': mask must be binary");
    gray_ = to_grayscale(image_);
  }

  const std::string& id() const { return id_; }
  const ImageRGB& image() const { return image_; }
  const Grid& gray() const { return gray_; }
  const Grid& mask() const { return mask_; }
  int height() const { return mask_.height(); }
  int width() const { return mask_.width(); }

  // Not safe for concurrent first use of the same operator.
  const EdgePrior& prior(const EdgeOperator& op) const {
    const std::string key = op.cache_key();
    auto it = priors_->find(key);
    if (it == priors_->end()) it = priors_->emplace(key, extract_edge_prior(image_, op)).first;
    return it->second;
  }

 private:
  std::string id_;
  ImageRGB image_;
  Grid mask_;
  Grid gray_;
  std::shared_ptr<std::map<std::string, EdgePrior>> priors_;
};

}  // namespace bicamo
