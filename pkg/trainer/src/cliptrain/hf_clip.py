"""Adapter for a locally stored pretrained CLIP checkpoint.

Wraps a ``transformers`` CLIP model behind the same interface as
``TinyEncoderPair``. The checkpoint directory is an external dependency;
nothing is downloaded.
"""

from __future__ import annotations

import torch

from .encoders import adapt_images


class HfClipEncoderPair:
    """Frozen CLIP encoders loaded from a local checkpoint directory."""

    image_mean = (0.48145466, 0.4578275, 0.40821073)
    image_std = (0.26862954, 0.26130258, 0.27577711)

    def __init__(self, checkpoint_dir: str):
        from transformers import CLIPModel, CLIPTokenizerFast

        self.model = CLIPModel.from_pretrained(checkpoint_dir, local_files_only=True)
        self.tokenizer = CLIPTokenizerFast.from_pretrained(checkpoint_dir, local_files_only=True)
        self.model.eval()
        for p in self.model.parameters():
            p.requires_grad_(False)
        self.feature_dim = self.model.config.projection_dim
        self.logit_scale = float(self.model.logit_scale.exp())
        self.token_dim = self.model.config.text_config.hidden_size
        self.image_size = self.model.config.vision_config.image_size

    def encode_image(self, images: torch.Tensor) -> torch.Tensor:
        return self.model.get_image_features(pixel_values=images)

    def encode_text(self, embeddings: torch.Tensor) -> torch.Tensor:
        """Run embedding sequences through the frozen text tower.

        Prompt sequences carry no end-of-sequence token, so pooling uses the
        final position instead of the trained EOS lookup.
        """
        if embeddings.dim() == 2:
            embeddings = embeddings.unsqueeze(0)
        out = self.model.text_model(inputs_embeds=embeddings)
        pooled = out.last_hidden_state[:, -1, :]
        return self.model.text_projection(pooled)

    def embed_word(self, word: str) -> torch.Tensor:
        ids = self.tokenizer(word, add_special_tokens=False)["input_ids"]
        table = self.model.text_model.embeddings.token_embedding
        return table(torch.tensor(ids)).mean(dim=0)

    def adapt(self, images: torch.Tensor) -> torch.Tensor:
        return adapt_images(images, self.image_size, self.image_mean, self.image_std)
