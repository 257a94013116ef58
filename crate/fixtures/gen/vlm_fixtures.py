"""Regenerates the manual/scene images and mock responses under fixtures/items."""
import json
import os

from PIL import Image, ImageDraw

ROOT = os.path.join(os.path.dirname(__file__), "..", "items")
W, H = 256, 192
CROP = (64, 16, 256, 192)  # left, top, right, bottom: drops the step-number panel


def scene(path, labels):
    img = Image.new("RGB", (W, H), (205, 200, 190))
    d = ImageDraw.Draw(img)
    for i, lab in enumerate(labels):
        x, y = 16 + (i % 4) * 60, 24 + (i // 4) * 80
        d.rectangle([x, y, x + 44, y + 56], fill=(120 + 20 * i, 90, 60))
        d.rectangle([x + 12, y + 18, x + 32, y + 38], fill=(0, 0, 0))
        d.text((x + 18, y + 22), str(lab), fill=(255, 255, 255))
    img.save(path, optimize=False)


def page(path, step, colors):
    img = Image.new("RGB", (W, H), (255, 255, 255))
    d = ImageDraw.Draw(img)
    d.rectangle([0, 0, 56, H - 1], fill=(250, 250, 250), outline=(0, 0, 0))
    d.text((22, 20), str(step), fill=(0, 0, 0))
    for i, c in enumerate(colors):
        d.rectangle([80 + 50 * i, 60, 120 + 50 * i, 150], fill=c)
    d.text((200, 168), f"{step}/{step}", fill=(90, 90, 90))
    img.save(path, optimize=False)
    return img


def cover(path, title):
    img = Image.new("RGB", (W, H), (245, 245, 245))
    d = ImageDraw.Draw(img)
    d.text((90, 80), title, fill=(0, 0, 0))
    img.save(path, optimize=False)


def steps_md(steps):
    out = []
    for i, (parts, refs, title) in enumerate(steps, 1):
        needed = [f"Subassembly from Step {r}" for r in refs] + [f"{n} ({p})" for n, p in parts]
        out.append(f"### Step {i}:\n- **Parts Needed:** {', '.join(needed)}\n- **Instructions:**\n  - **{title}:** "
                   + " ".join(f"place the {n.lower()} ({p})" for n, p in parts) + " as shown in the segmented manual.")
    return "\n\n".join(out)


def item(name, parts, tree, eq, step_specs, part_list, roles, tree_answers, title, connectivity=()):
    base = os.path.join(ROOT, name)
    os.makedirs(base, exist_ok=True)
    scene(os.path.join(base, "scene.png"), [p for p, _ in parts])
    cover(os.path.join(base, "cover.png"), title)
    pages, crops = ["cover.png"], []
    palette = [(220, 40, 40), (40, 170, 60), (140, 60, 170), (230, 150, 30)]
    for i, (sp, _, _) in enumerate(step_specs, 1):
        img = page(os.path.join(base, f"page{i}.png"), i, palette[: max(1, len(sp))])
        img.crop(CROP).save(os.path.join(base, f"page{i}_crop.png"), optimize=False)
        pages.append(f"page{i}.png")
        crops.append(f"page{i}_crop.png")
    doc = {
        "id": name,
        "parts": [{"id": p, "name": n} for p, n in parts],
        "connectivity": [list(e) for e in connectivity],
        "equivalences": eq,
        "gt_tree": tree,
        "manual_images": pages,
        "scene_image": "scene.png",
        "cropped_pages": crops,
    }
    with open(os.path.join(base, "item.json"), "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    fence = "```"
    mock = {
        "model": "mock-vlm",
        "responses": {
            "part_list": f"{fence}json\n{json.dumps(part_list, indent=2)}\n{fence}",
            "part_roles": json.dumps(roles, indent=2),
            "plan": f"We have {len(step_specs) + 2} input images, one of them is the labeled scene, so there are "
                    f"{len(step_specs)} total steps.\n\n" + steps_md(step_specs),
            "tree": tree_answers,
        },
    }
    with open(os.path.join(base, "mock.json"), "w") as f:
        json.dump(mock, f, indent=2)
        f.write("\n")


CHAIR_PARTS = [(1, "Backrest Frame"), (2, "Side Leg Frame"), (3, "Support Beam"), (4, "Support Beam"),
               (5, "Seat Cushion"), (7, "Side Leg Frame")]
item(
    "chair",
    CHAIR_PARTS,
    [[[[1, 5], 2], 7], 3, 4],
    [[2, 7], [3, 4]],
    [
        ([("Backrest Frame", 1), ("Seat Cushion", 5)], [], "Align Frame and Seat"),
        ([("Side Leg Frame", 2)], [1], "Position Leg Frame"),
        ([("Side Leg Frame", 7)], [2], "Attach Second Leg Frame"),
        ([("Support Beam", 3), ("Support Beam", 4)], [3], "Connect Support Beams"),
    ],
    [{"name": n.lower(), "number": [p]} for p, n in CHAIR_PARTS],
    [
        {"name": "backrest frame", "number": [1], "explanation": "supports the back of the person sitting, shown upright on the first page"},
        {"name": "side leg frame", "number": [2], "explanation": "one of the two side frames carrying the seat"},
        {"name": "support beam", "number": [3], "explanation": "horizontal beam bracing the two side frames"},
        {"name": "support beam", "number": [4], "explanation": "horizontal beam bracing the two side frames"},
        {"name": "seat cushion", "number": [5], "explanation": "the surface people sit on, placed on the frame"},
        {"name": "side leg frame", "number": [7], "explanation": "one of the two side frames carrying the seat"},
    ],
    "'''python\n[\n    [\n        [\n            [\n                1,\n                5\n            ],\n            2\n        ],\n        7\n    ],\n    3,\n    4\n]\n'''",
    "CHAIR",
    [(1, 5), (1, 2), (1, 7), (2, 5), (5, 7), (2, 3), (2, 4), (3, 7), (4, 7)],
)

SIDE_PARTS = [(0, "Side Frame"), (1, "Side Frame"), (2, "Seat Frame"), (3, "Back Frame")]
SEAT_ROLE = ("for people sitting on a chair, the seat offers essential support and comfort "
             "and is positioned centrally within the chair's frame")
item(
    "side_frames",
    SIDE_PARTS,
    [[0, 1, 2], 3],
    [[0, 1]],
    [
        ([("Side Frame", 0), ("Side Frame", 1), ("Seat Frame", 2)], [], "Join Side Frames to Seat"),
        ([("Back Frame", 3)], [1], "Attach Back Frame"),
    ],
    [{"name": n.lower(), "label": [p]} for p, n in SIDE_PARTS],
    [
        {"name": "side frame", "label": [0], "role": "holds the seat frame from the side and stands on the floor"},
        {"name": "side frame", "label": [1], "role": "holds the seat frame from the side and stands on the floor"},
        {"name": "seat frame", "label": [2], "role": SEAT_ROLE},
        {"name": "back frame", "label": [3], "role": "supports the back of the person sitting"},
    ],
    [
        "```\n[[0, 1, 2], 3]\n```",
        "The structure is:\n[[0, 2], 1, 3]",
        "```\n[[0, 1, 2], 3]\n```",
    ],
    "STOOL",
    [(0, 2), (1, 2), (0, 3), (1, 3)],
)
