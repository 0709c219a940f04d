#include "mtaa/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace mtaa {

Image load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot decode image: " + path.string());
  Image img(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(y, x, 0) = row[x][2];
      img.at(y, x, 1) = row[x][1];
      img.at(y, x, 2) = row[x][0];
    }
  }
  return img;
}

void save_image(const std::filesystem::path& path, const Image& img) {
  if (img.height <= 0 || img.width <= 0) throw InvalidInput("save_image: empty image");
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      row[x][2] = img.at(y, x, 0);
      row[x][1] = img.at(y, x, 1);
      row[x][0] = img.at(y, x, 2);
    }
  }
  if (!cv::imwrite(path.string(), bgr)) {
    throw IoError("cannot write image: " + path.string());
  }
}

}  // namespace mtaa
