#!/usr/bin/env python3
"""Export torchvision ImageNet weights as plain tensor dicts for dermclass.

The C++ loader reads `<weights_dir>/<name>.pretrained.pt`, a torch.save'd
{parameter name: tensor} dict with torchvision's key names. The classifier
head is skipped on load, so the 1000-way ImageNet head is harmless.
"""
import argparse
import pathlib
import sys

import torch
import torchvision

BACKBONES = {
    "resnet18": ("resnet18", "ResNet18_Weights"),
    "resnet50": ("resnet50", "ResNet50_Weights"),
    "resnet152": ("resnet152", "ResNet152_Weights"),
    "densenet161": ("densenet161", "DenseNet161_Weights"),
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--backbone", choices=sorted(BACKBONES) + ["all"], default="all")
    parser.add_argument("--out", default="weights", help="output directory (default: weights)")
    parser.add_argument("--random", action="store_true",
                        help="skip the download and write randomly initialised weights (format checks only)")
    args = parser.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = sorted(BACKBONES) if args.backbone == "all" else [args.backbone]
    for name in names:
        builder, weights_enum = BACKBONES[name]
        weights = None if args.random else getattr(torchvision.models, weights_enum).IMAGENET1K_V1
        try:
            model = getattr(torchvision.models, builder)(weights=weights)
        except Exception as exc:  # download failures surface as URLError/RuntimeError
            print(f"error: cannot obtain {name} weights: {exc}", file=sys.stderr)
            return 1
        state = {k: v.detach().contiguous() for k, v in model.state_dict().items()}
        path = out / f"{name}.pretrained.pt"
        torch.save(state, path)
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
