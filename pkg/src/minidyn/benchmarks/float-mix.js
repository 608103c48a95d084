// Mixed integer and floating point arithmetic.
function mix(n) {
    var acc = 0;
    var x = 0.5;
    for (var i = 0; i < n; i++) {
        acc = acc + x * i;
        x = x / 2 + 0.25;
        if (i % 3 == 0) acc = acc - i;
    }
    return acc;
}

function main() {
    return mix(300);
}
