// Bit counting where every variable lives in a global.
var b = 0;
var m = 1;
var c = 0;
var x = 0;
var r = 0;
var total = 0;

function bitsinbyte() {
    m = 1;
    c = 0;
    while (m < 0x100) {
        r = b & m;
        if (r) c = c + 1;
        m = m << 1;
    }
    return c;
}

function main() {
    total = 0;
    x = 0;
    while (x < 64) {
        b = x;
        total = total + bitsinbyte();
        x = x + 1;
    }
    return total;
}
