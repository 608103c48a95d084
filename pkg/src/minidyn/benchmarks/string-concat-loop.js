// Build a string piece by piece.
function build(n) {
    var s = "";
    for (var i = 0; i < n; i++) {
        if (i % 10 == 0) {
            s = s + "|";
        }
        s = s + i % 10;
    }
    return s.length;
}

function main() {
    return build(200);
}
