"""ResNet-family backbones with per-stage feature taps."""

import torch
from torchvision import models

# hierarchy level j -> residual stage; level 2 and 3 are the usual taps
SUPPORTED_LEVELS = (1, 2, 3, 4)

_FACTORIES = {
    "wide_resnet50_2": (models.wide_resnet50_2, "IMAGENET1K_V1"),
    "resnet18": (models.resnet18, "IMAGENET1K_V1"),
    "resnet50": (models.resnet50, "IMAGENET1K_V1"),
    "resnet101": (models.resnet101, "IMAGENET1K_V1"),
}


def available_backbones():
    return sorted(_FACTORIES)


def load_backbone(backbone_id, weights="imagenet", seed=0):
    """Build the backbone in eval mode.

    ``weights``: "imagenet" for the pretrained weights, "none" for a
    seeded random initialization (shape tests, smoke runs), or a path to a
    state-dict file.
    """
    if backbone_id not in _FACTORIES:
        raise ValueError(
            f"unknown backbone {backbone_id!r}; available: {available_backbones()}"
        )
    factory, weight_tag = _FACTORIES[backbone_id]
    if weights == "imagenet":
        model = factory(weights=weight_tag)
    elif weights == "none":
        torch.manual_seed(seed)
        model = factory(weights=None)
    else:
        model = factory(weights=None)
        state = torch.load(weights, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


@torch.no_grad()
def extract_levels(model, batch, levels):
    """Run the stem and residual stages, returning {level: (B,C,H,W)}."""
    bad = [j for j in levels if j not in SUPPORTED_LEVELS]
    if bad:
        raise ValueError(f"unsupported hierarchy levels {bad}")
    x = model.conv1(batch)
    x = model.bn1(x)
    x = model.relu(x)
    x = model.maxpool(x)
    out = {}
    for j, stage in enumerate(
        (model.layer1, model.layer2, model.layer3, model.layer4), start=1
    ):
        x = stage(x)
        if j in levels:
            out[j] = x
        if j >= max(levels):
            break
    return out
