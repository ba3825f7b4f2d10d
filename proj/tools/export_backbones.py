#!/usr/bin/env python3
"""Export the Keras ImageNet backbones (no top) to ONNX for harbench.

Writes <out>/<id>.onnx with input "input" of shape (N, 160, 160, 3), NHWC
float32, already normalized the way the backbone expects. Needs
tensorflow and tf2onnx; downloading the ImageNet weights needs network access.

    python3 tools/export_backbones.py --out ~/.cache/harbench/weights
    python3 tools/export_backbones.py --only xception --out weights/
"""

import argparse
import os
import sys

BACKBONES = {
    "vgg16": "VGG16",
    "resnet50": "ResNet50",
    "inceptionv3": "InceptionV3",
    "xception": "Xception",
}


def export(backbone_id, out_dir, size, weights, opset):
    import tensorflow as tf
    import tf2onnx

    ctor = getattr(tf.keras.applications, BACKBONES[backbone_id])
    model = ctor(include_top=False, weights=weights, input_shape=(size, size, 3))
    spec = (tf.TensorSpec((None, size, size, 3), tf.float32, name="input"),)

    @tf.function(input_signature=spec)
    def forward(x):
        return model(x, training=False)

    path = os.path.join(out_dir, backbone_id + ".onnx")
    tf2onnx.convert.from_function(forward, input_signature=spec, opset=opset, output_path=path)
    return path


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=os.environ.get("HARBENCH_WEIGHTS_DIR",
                                                        os.path.expanduser("~/.cache/harbench/weights")))
    parser.add_argument("--only", choices=sorted(BACKBONES), action="append")
    parser.add_argument("--size", type=int, default=160)
    parser.add_argument("--weights", default="imagenet", help="'imagenet' or 'none' (random init, shapes only)")
    parser.add_argument("--opset", type=int, default=13)
    args = parser.parse_args()

    os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")
    os.makedirs(args.out, exist_ok=True)
    weights = None if args.weights == "none" else args.weights
    for backbone_id in args.only or list(BACKBONES):
        print(backbone_id, "->", export(backbone_id, args.out, args.size, weights, args.opset), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
